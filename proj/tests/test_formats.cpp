#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "da/common.hpp"
#include "da/formats.hpp"
#include "da/image.hpp"
#include "doctest.h"

using namespace da;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::path("test_tmp") / ("formats_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

DisparityMap random_quantized_map(Rng& rng, int w, int h) {
  DisparityMap map(w, h);
  for (auto& v : map.data) {
    if (rng.uniform() < 0.15) {
      v = kInvalidDisparity;
    } else {
      // Values representable in the kitti-png16 domain: k/256, k in [1,65535].
      const int k = rng.uniform_int(1, 65535);
      v = static_cast<float>(k) / 256.0f;
    }
  }
  return map;
}

}  // namespace

TEST_CASE("pgm endpoint and midpoint scaling") {
  const fs::path dir = temp_dir();
  write_bytes(dir / "two.pgm", std::string("P5\n2 1\n255\n") +
                                   std::string(1, '\0') + std::string(1, '\xff'));
  Image img = read_image((dir / "two.pgm").string());
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.data[0] == 0.0f);
  CHECK(img.data[1] == 1.0f);

  write_bytes(dir / "mid.pgm", std::string("P5\n1 1\n255\n") + std::string(1, '\x80'));
  Image mid = read_image((dir / "mid.pgm").string());
  CHECK(mid.data[0] == doctest::Approx(128.0f / 255.0f));
}

TEST_CASE("truncated and malformed image files") {
  const fs::path dir = temp_dir();
  write_bytes(dir / "short.pgm", "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(read_image((dir / "short.pgm").string()), IoError);
  write_bytes(dir / "junk.bin", "this is not an image at all............");
  CHECK_THROWS_AS(read_image((dir / "junk.bin").string()), FormatError);
  CHECK_THROWS_AS(read_image((dir / "missing.png").string()), IoError);
}

TEST_CASE("png grayscale and color-to-luma round trips") {
  const fs::path dir = temp_dir();
  Image img(7, 5);
  Rng rng(3);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  write_image(img, (dir / "gray.png").string());
  Image back = read_image((dir / "gray.png").string());
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1.0 / 255.0));
}

TEST_CASE("image values stay in [0,1] after every load path") {
  const fs::path dir = temp_dir();
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Image img(9, 4);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    const fs::path p = dir / ("t" + std::to_string(trial) + ".png");
    write_image(img, p.string());
    Image back = read_image(p.string());
    CHECK_NOTHROW(validate_image(back));
  }
}

TEST_CASE("kitti-png16 encoding conventions") {
  const fs::path dir = temp_dir();
  DisparityMap map(2, 1);
  map.at(0, 0) = 1.0f;
  map.at(1, 0) = kInvalidDisparity;
  const std::string path = (dir / "d.png").string();
  write_disparity(map, path, DisparityFormat::kitti_png16);
  DisparityMap back = read_disparity(path, DisparityFormat::kitti_png16);
  CHECK(back.at(0, 0) == 1.0f);  // stored value 256 decodes as 1.0
  CHECK(back.at(1, 0) == kInvalidDisparity);

  DisparityMap too_big(1, 1);
  too_big.at(0, 0) = 300.0f;  // 300 * 256 > 65535
  CHECK_THROWS_AS(
      write_disparity(too_big, (dir / "big.png").string(),
                      DisparityFormat::kitti_png16),
      RangeError);
}

TEST_CASE("kitti-png16 round trip is bit-exact on the encodable domain") {
  const fs::path dir = temp_dir();
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    DisparityMap map = random_quantized_map(rng, 13, 9);
    const std::string path = (dir / "rt.png").string();
    write_disparity(map, path, DisparityFormat::kitti_png16);
    DisparityMap back = read_disparity(path, DisparityFormat::kitti_png16);
    REQUIRE(back.width == map.width);
    REQUIRE(back.height == map.height);
    CHECK(back.data == map.data);
  }
}

TEST_CASE("pfm round trip is bit-exact including sentinels") {
  const fs::path dir = temp_dir();
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    DisparityMap map(11, 6);
    for (auto& v : map.data)
      v = rng.uniform() < 0.2 ? kInvalidDisparity
                              : static_cast<float>(rng.uniform(0.0, 192.0));
    const std::string path = (dir / "rt.pfm").string();
    write_disparity(map, path, DisparityFormat::pfm);
    DisparityMap back = read_disparity(path, DisparityFormat::pfm);
    CHECK(back.data == map.data);
  }
}

TEST_CASE("pfm header handling") {
  const fs::path dir = temp_dir();
  write_bytes(dir / "bad.pfm", "PF\n2 2\n-1.0\n");
  CHECK_THROWS_AS(read_disparity((dir / "bad.pfm").string(),
                                 DisparityFormat::pfm),
                  FormatError);
  write_bytes(dir / "junk.pfm", "Px\n2 2\n-1.0\n");
  CHECK_THROWS_AS(read_disparity((dir / "junk.pfm").string(),
                                 DisparityFormat::pfm),
                  FormatError);

  // Big-endian payload (positive scale) decodes identically.
  DisparityMap map(3, 2);
  for (std::size_t i = 0; i < map.size(); ++i)
    map.data[i] = static_cast<float>(i) + 0.25f;
  std::string payload = "Pf\n3 2\n1.0\n";
  for (int y = 1; y >= 0; --y)
    for (int x = 0; x < 3; ++x) {
      float v = map.at(x, y);
      unsigned char b[4];
      std::memcpy(b, &v, 4);
      payload.push_back(static_cast<char>(b[3]));
      payload.push_back(static_cast<char>(b[2]));
      payload.push_back(static_cast<char>(b[1]));
      payload.push_back(static_cast<char>(b[0]));
    }
  write_bytes(dir / "be.pfm", payload);
  DisparityMap be = read_disparity((dir / "be.pfm").string(),
                                   DisparityFormat::pfm);
  CHECK(be.data == map.data);
}

TEST_CASE("pfm rejects disparities above 2^15") {
  const fs::path dir = temp_dir();
  std::string payload = "Pf\n1 1\n-1.0\n";
  const float big = 40000.0f;
  payload.append(reinterpret_cast<const char*>(&big), 4);
  write_bytes(dir / "huge.pfm", payload);
  CHECK_THROWS_AS(read_disparity((dir / "huge.pfm").string(),
                                 DisparityFormat::pfm),
                  RangeError);
}

TEST_CASE("confidence maps persist through pfm") {
  const fs::path dir = temp_dir();
  ConfidenceMap conf(5, 4);
  Rng rng(17);
  for (auto& v : conf.data) v = static_cast<float>(rng.uniform());
  const std::string path = (dir / "c.pfm").string();
  write_confidence(conf, path);
  ConfidenceMap back = read_confidence(path);
  CHECK(back.data == conf.data);
}

TEST_CASE("masks persist through pgm") {
  const fs::path dir = temp_dir();
  std::vector<std::uint8_t> mask = {1, 0, 0, 1, 1, 0};
  const std::string path = (dir / "m.pgm").string();
  write_mask(mask, 3, 2, path);
  int w = 0, h = 0;
  auto back = read_mask(path, &w, &h);
  CHECK(w == 3);
  CHECK(h == 2);
  CHECK(back == mask);
}
