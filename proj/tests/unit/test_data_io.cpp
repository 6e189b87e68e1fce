#include <fstream>

#include "stegamark/data_io.hpp"
#include "synthetic.hpp"

#include "doctest_torch.hpp"

using namespace stegamark;
namespace fs = std::filesystem;

namespace {

torch::Tensor gradient_image(std::int64_t h, std::int64_t w) {
  auto ys = torch::linspace(0.0, 1.0, h).view({1, h, 1}).expand({1, h, w});
  auto xs = torch::linspace(0.0, 1.0, w).view({1, 1, w}).expand({1, h, w});
  return torch::cat({ys, xs, (ys + xs) / 2}, 0).contiguous();
}

}  // namespace

TEST_CASE("Message parsing and complement") {
  const auto m = Message::from_string("0110");
  CHECK(m.size() == 4);
  CHECK(m.to_string() == "0110");
  CHECK(m.complement().to_string() == "1001");
  CHECK(Message::from_tensor(m.to_tensor()) == m);
  CHECK_THROWS_AS(Message::from_string("01a"), std::invalid_argument);
  CHECK_THROWS_AS(Message(std::vector<std::uint8_t>{0, 2}), std::invalid_argument);
}

TEST_CASE("ImageBuffer enforces shape, size and range") {
  CHECK_NOTHROW(ImageBuffer(torch::rand({3, 16, 16})));
  CHECK_THROWS_AS(ImageBuffer(torch::rand({3, 15, 16})), std::invalid_argument);
  CHECK_THROWS_AS(ImageBuffer(torch::rand({1, 16, 16})), std::invalid_argument);
  CHECK_THROWS_AS(ImageBuffer(torch::full({3, 16, 16}, 1.01)), std::invalid_argument);
  CHECK_THROWS_AS(ImageBuffer(torch::full({3, 16, 16}, -0.01)), std::invalid_argument);
}

TEST_CASE("load_image_dir loads, resizes and skips strays") {
  const auto dir = testing::scratch_dir("data_io_load");
  for (int i = 0; i < 3; ++i) save_png(gradient_image(40 + i, 50), dir / ("im" + std::to_string(i) + ".png"));
  std::ofstream(dir / "broken.png") << "not an image";
  std::ofstream(dir / "notes.txt") << "ignored";

  const auto ds = load_image_dir(dir, {400, 400});
  REQUIRE(ds.size() == 3);
  CHECK((ds.names == std::vector<std::string>{"im0.png", "im1.png", "im2.png"}));
  for (const auto& item : ds.items) {
    CHECK((item.size() == ImageSize{400, 400}));
    CHECK(item.tensor().min().item<float>() >= 0.0f);
    CHECK(item.tensor().max().item<float>() <= 1.0f);
  }

  SUBCASE("a 512x512 source becomes exactly 400x400") {
    const auto big = testing::scratch_dir("data_io_big");
    save_png(gradient_image(512, 512), big / "big.png");
    const auto one = load_image_dir(big, {400, 400});
    REQUIRE(one.size() == 1);
    CHECK(one.items[0].tensor().sizes() == torch::IntArrayRef({3, 400, 400}));
  }

  SUBCASE("loading is deterministic") {
    const auto again = load_image_dir(dir, {400, 400});
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(torch::equal(ds.items[i].tensor(), again.items[i].tensor()));
  }
}

TEST_CASE("load_image_dir errors") {
  const auto empty = testing::scratch_dir("data_io_empty");
  CHECK_THROWS_AS(load_image_dir(empty, {64, 64}), std::runtime_error);
  CHECK_THROWS_AS(load_image_dir(empty / "missing", {64, 64}), std::runtime_error);
  try {
    load_image_dir(empty, {64, 64});
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(empty.string()) != std::string::npos);
  }
}

TEST_CASE("8-bit decode scales by 1/255 and PNG round trip is exact") {
  const auto dir = testing::scratch_dir("data_io_png");
  auto img = quantize_8bit(torch::rand({3, 20, 24}));
  save_png(img, dir / "a.png");
  const auto back = load_image(dir / "a.png");
  CHECK(torch::allclose(back.tensor(), img, 0.0, 1e-7));
  const auto levels = back.tensor() * 255.0;
  CHECK(torch::allclose(levels, levels.round(), 0.0, 1e-4));
}

TEST_CASE("quantize_8bit rounds half up") {
  auto x = torch::tensor({0.5 / 255.0, 1.49 / 255.0, 254.5 / 255.0, 1.2, -0.3}, torch::kFloat64);
  auto q = quantize_8bit(x) * 255.0;
  CHECK(q[0].item<double>() == doctest::Approx(1.0));
  CHECK(q[1].item<double>() == doctest::Approx(1.0));
  CHECK(q[2].item<double>() == doctest::Approx(255.0));
  CHECK(q[3].item<double>() == doctest::Approx(255.0));
  CHECK(q[4].item<double>() == doctest::Approx(0.0));
}

TEST_CASE("random_message") {
  Rng rng(7);
  const auto m = random_message(100, rng);
  CHECK(m.size() == 100);
  for (auto b : m.bits()) CHECK((b == 0 || b == 1));

  Rng a(42), b(42);
  CHECK(random_message(100, a) == random_message(100, b));
  CHECK_THROWS_AS(random_message(0, rng), std::invalid_argument);

  Rng big(3);
  double ones = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ones += random_message(1, big)[0];
  const double mean = ones / draws;
  CHECK(mean >= 0.48);
  CHECK(mean <= 0.52);
}

TEST_CASE("sample_batch") {
  Dataset ds;
  ds.target_size = {16, 16};
  for (int i = 0; i < 3; ++i) ds.items.emplace_back(torch::full({3, 16, 16}, 0.25 * i));

  Rng rng(1);
  const auto batch = sample_batch(ds, 4, 8, rng);
  CHECK(batch.size() == 4);
  CHECK(batch.images.sizes() == torch::IntArrayRef({4, 3, 16, 16}));
  CHECK(batch.messages.sizes() == torch::IntArrayRef({4, 8}));

  Rng r1(9), r2(9);
  const auto b1 = sample_batch(ds, 5, 8, r1);
  const auto b2 = sample_batch(ds, 5, 8, r2);
  CHECK(torch::equal(b1.images, b2.images));
  CHECK(torch::equal(b1.messages, b2.messages));

  CHECK_THROWS_AS(sample_batch(ds, 0, 8, rng), std::invalid_argument);

  SUBCASE("uniform choice among two items") {
    Dataset two;
    two.target_size = {16, 16};
    two.items.emplace_back(torch::zeros({3, 16, 16}));
    two.items.emplace_back(torch::ones({3, 16, 16}));
    Rng r(5);
    const auto big = sample_batch(two, 1000, 4, r);
    const double freq = big.images.select(1, 0).select(1, 0).select(1, 0).mean().item<double>();
    CHECK(std::abs(freq - 0.5) <= 0.05);
  }
}

TEST_CASE("bit_accuracy") {
  Rng rng(11);
  const auto a = random_message(100, rng);
  const auto b = random_message(100, rng);
  CHECK(bit_accuracy(a, a) == 1.0);
  CHECK(bit_accuracy(a, a.complement()) == 0.0);
  CHECK(bit_accuracy(a, b) == bit_accuracy(b, a));

  auto bits = a.bits();
  for (int i : {3, 17, 42, 64, 99}) bits[i] = static_cast<std::uint8_t>(1 - bits[i]);
  CHECK(bit_accuracy(a, Message(bits)) == doctest::Approx(0.95).epsilon(1e-12));

  CHECK_THROWS_AS(bit_accuracy(a, random_message(99, rng)), std::invalid_argument);

  const auto ta = torch::stack({a.to_tensor(), b.to_tensor()});
  const auto tb = torch::stack({a.to_tensor(), a.to_tensor()});
  CHECK(bit_accuracy(ta, tb) == doctest::Approx((1.0 + bit_accuracy(a, b)) / 2.0));
}
