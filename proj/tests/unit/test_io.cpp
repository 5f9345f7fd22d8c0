#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "desatscan/common.hpp"
#include "desatscan/dstf.hpp"
#include "desatscan/tsv.hpp"

using namespace desatscan;

TEST_CASE("dstf layout is little-endian with a rank header") {
  const std::uint32_t dims[2] = {2, 3};
  const float data[6] = {0, 1, 2, 3, 4, -1.5f};
  const auto bytes = encode_dstf(dims, data);
  REQUIRE(bytes.size() == 4 + 4 + 1 + 8 + 24);
  CHECK(std::memcmp(bytes.data(), "DSTF", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  CHECK(bytes[9] == 2);
  CHECK(bytes[13] == 3);
  // -1.5f = 0xBFC00000
  CHECK(bytes[bytes.size() - 1] == 0xBF);
  CHECK(bytes[bytes.size() - 2] == 0xC0);

  std::size_t used = 0;
  auto twice = bytes;
  twice.insert(twice.end(), bytes.begin(), bytes.end());
  const auto t = decode_dstf(twice, &used);
  CHECK(used == bytes.size());
  CHECK(t.dims == std::vector<std::uint32_t>{2, 3});
  CHECK(t.data == std::vector<float>(data, data + 6));

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_dstf(bad), ParseError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_dstf(bad), ParseError);
  CHECK_THROWS_AS(encode_dstf(dims, std::span<const float>(data, 5)), Error);
  CHECK_THROWS_AS(read_dstf("/nonexistent/x.dstf"), Error);
}

TEST_CASE("dstf file round trip") {
  const auto p = std::filesystem::temp_directory_path() / "desatscan_io_test.dstf";
  const std::uint32_t dims[3] = {1, 2, 2};
  const float data[4] = {1e-12f, 3.0f, -7.25f, 1e30f};
  write_dstf(p, dims, data);
  const auto t = read_dstf(p);
  std::filesystem::remove(p);
  CHECK(t.data == std::vector<float>(data, data + 4));
}

TEST_CASE("tsv parse, format and lookup") {
  const auto t = parse_tsv("a\tb\n1\tx\n2\ty\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == "y");
  CHECK(t.column("b") == 1);
  CHECK_THROWS_AS(t.column("c"), ParseError);
  CHECK(format_tsv(t) == "a\tb\n1\tx\n2\ty\n");
  CHECK_THROWS_AS(parse_tsv("a\tb\n1\n"), ParseError);
  CHECK(parse_double(" 2.5 ", "v") == 2.5);
  CHECK_THROWS_AS(parse_double("2.5x", "v"), ParseError);
  CHECK(parse_int("-4", "v") == -4);
  CHECK_THROWS_AS(parse_int("4.0", "v"), ParseError);
  CHECK(format_fixed(0.5) == "0.500000");
  CHECK(format_fixed(2.0 / 3.0, 3) == "0.667");
}

TEST_CASE("stage and string helpers") {
  CHECK(parse_stage("rem") == SleepStage::REM);
  CHECK(parse_stage("N3") == SleepStage::N3);
  CHECK_FALSE(parse_stage("N4"));
  CHECK(table_name(SleepStage::N1) == "NREM1");
  CHECK(trim("  a b \t") == "a b");
  CHECK(iequals("F3-M2", "f3-m2"));
}
