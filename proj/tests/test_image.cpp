#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ani/image.hpp"

using namespace ani;

namespace {
std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("ppm round trip and byte mapping") {
  auto path = tmp_file("ani_t.ppm");
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n2 1\n255\n";
    const unsigned char bytes[6] = {0, 0, 0, 255, 0, 0};
    out.write(reinterpret_cast<const char*>(bytes), 6);
  }
  RgbImage img = load_image(path.string());
  CHECK(img.width == 2);
  CHECK(img.height == 1);
  CHECK(img.at(0, 0, 0) == 0.0f);
  CHECK(img.at(0, 1, 0) == 1.0f);
  CHECK(img.at(0, 1, 1) == 0.0f);
  std::filesystem::remove(path);
}

TEST_CASE("png save/load round trip within 1/255") {
  RgbImage img(5, 7);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = (y * 7 + x + c * 0.21f) / 40.0f;
  auto path = tmp_file("ani_t.png");
  save_image(img, path.string());
  RgbImage back = load_image(path.string());
  REQUIRE(back.width == 7);
  REQUIRE(back.height == 5);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(back.data[i] - img.data[i]) <= 1.0f / 255.0f);

  // save-load-save is byte stable
  auto path2 = tmp_file("ani_t2.png");
  save_image(back, path2.string());
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("1x1 white png decodes to ones") {
  RgbImage white(1, 1, 1.0f);
  auto path = tmp_file("ani_white.png");
  save_image(white, path.string());
  RgbImage img = load_image(path.string());
  CHECK(img.at(0, 0, 0) == 1.0f);
  CHECK(img.at(0, 0, 1) == 1.0f);
  CHECK(img.at(0, 0, 2) == 1.0f);
  std::filesystem::remove(path);
}

TEST_CASE("missing or bogus files raise IoError with the path") {
  try {
    load_image("/nonexistent/zzz.png");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/zzz.png") != std::string::npos);
  }
  auto path = tmp_file("ani_bogus.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not an image at all";
  }
  CHECK_THROWS_AS(load_image(path.string()), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("crop: full frame is the identity, bounds are checked") {
  RgbImage img(4, 6);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<float>(i) / img.data.size();
  RgbImage full = crop(img, 0, 0, 6, 4);
  CHECK(full.data == img.data);
  RgbImage sub = crop(img, 2, 1, 3, 2);
  CHECK(sub.width == 3);
  CHECK(sub.height == 2);
  CHECK(sub.at(0, 0, 0) == img.at(1, 2, 0));
  CHECK_THROWS_AS(crop(img, 4, 0, 3, 4), DimensionError);
}

TEST_CASE("downscale: identity at factor 1, checkerboard averages to 0.5") {
  RgbImage img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (x + y) % 2 ? 1.0f : 0.0f;
  CHECK(downscale(img, 1).data == img.data);
  RgbImage half = downscale(img, 2);
  CHECK(half.width == 2);
  CHECK(half.height == 2);
  for (float v : half.data) CHECK(v == 0.5f);
}

TEST_CASE("targets round trip clamps to [0,1]") {
  RgbImage img(3, 2);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.1f * i;
  Matrix t = image_to_targets(img);
  CHECK(t.rows() == 6);
  CHECK(t(1, 0) == img.at(0, 1, 0));
  t(0, 0) = -3.0f;
  t(0, 1) = 7.0f;
  RgbImage back = targets_to_image(t, 3, 2);
  CHECK(back.at(0, 0, 0) == 0.0f);
  CHECK(back.at(0, 0, 1) == 1.0f);
}
