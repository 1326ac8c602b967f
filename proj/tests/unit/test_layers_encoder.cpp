#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dabs/checkpoint.hpp"
#include "dabs/encoder.hpp"
#include "dabs/error.hpp"
#include "testing.hpp"

using namespace dabs;
using dabs::testing::uniform_tensor;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dabs_unit";
  fs::create_directories(dir);
  return dir / name;
}

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.vocab_size = 20;
  c.d = 8;
  c.layers = 3;
  c.heads = 2;
  c.ffn_mult = 2;
  c.max_len = 12;
  c.dropout = 0.0;
  return c;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("parameter names are unique") {
  Rng rng(1);
  ParameterSet<double> ps;
  ps.create("a", {2}, Init::zeros(), rng);
  CHECK_THROWS((void)ps.create("a", {3}, Init::zeros(), rng));
  CHECK(ps.contains("a"));
  CHECK_THROWS_AS((void)ps.get("b"), InputError);
}

TEST_CASE("initializers") {
  Rng rng(2);
  ParameterSet<double> ps;
  for (double v : ps.create("c", {4}, Init::constant(0.0), rng).to_vector()) CHECK(v == 0.0);
  for (double v : ps.create("k", {4}, Init::constant(2.5), rng).to_vector()) CHECK(v == 2.5);
  for (double v : ps.create("o", {4}, Init::ones(), rng).to_vector()) CHECK(v == 1.0);
  const auto x = ps.create("x", {50, 50}, Init::xavier(), rng).to_vector();
  const double limit = std::sqrt(6.0 / 100.0);
  for (double v : x) CHECK(std::abs(v) <= limit);
  CHECK(ps.scalar_count() == 12 + 2500);
}

TEST_CASE("attention with identity projections over equal rows returns the row") {
  Rng rng(3);
  ParameterSet<double> ps;
  auto mha = MultiHeadAttention<double>::create(ps, "m", 3, 1, rng);
  for (auto* lin : {&mha.query, &mha.key, &mha.value, &mha.output}) {
    auto w = lin->weight.mutable_data();
    for (std::size_t i = 0; i < 9; ++i) w[i] = (i % 4 == 0) ? 1.0 : 0.0;
    for (auto& b : lin->bias.mutable_data()) b = 0.0;
  }
  const auto x = Tensor<double>::from({4, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
  std::vector<Tensor<double>> weights;
  const auto y = mha(x, &weights).to_vector();
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(x[i]));
  for (double w : weights[0].to_vector()) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("attention matches a hand evaluation") {
  // n = 2, d = 2, one head, identity Q/K/O and V swapping the two channels.
  Rng rng(4);
  ParameterSet<double> ps;
  auto mha = MultiHeadAttention<double>::create(ps, "m", 2, 1, rng);
  auto set = [](Linear<double>& l, std::vector<double> w) {
    std::copy(w.begin(), w.end(), l.weight.mutable_data().begin());
    for (auto& b : l.bias.mutable_data()) b = 0.0;
  };
  set(mha.query, {1, 0, 0, 1});
  set(mha.key, {1, 0, 0, 1});
  set(mha.value, {0, 1, 1, 0});
  set(mha.output, {1, 0, 0, 1});
  const auto x = Tensor<double>::from({2, 2}, {1, 0, 0, 2});
  const auto y = mha(x).to_vector();
  // scores / sqrt(2): row 1 (1, 0), row 2 (0, 4)
  const double s = 1.0 / std::sqrt(2.0);
  const double a11 = std::exp(s) / (std::exp(s) + 1.0);
  const double a22 = std::exp(4 * s) / (std::exp(4 * s) + 1.0);
  // values: row 1 -> (0, 1), row 2 -> (2, 0)
  CHECK(y[0] == doctest::Approx((1 - a11) * 2));
  CHECK(y[1] == doctest::Approx(a11 * 1));
  CHECK(y[2] == doctest::Approx(a22 * 2));
  CHECK(y[3] == doctest::Approx(1 - a22));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(5);
  ParameterSet<float> ps;
  ps.create("w", {3, 4}, Init::xavier(), rng);
  ps.create("b", {4}, Init::normal(1.0), rng);
  const auto path = temp_path("ckpt.dabs").string();
  io::save_checkpoint(ps, path);
  ParameterSet<float> other;
  Rng rng2(99);
  other.create("w", {3, 4}, Init::zeros(), rng2);
  other.create("b", {4}, Init::zeros(), rng2);
  io::load_checkpoint(other, path);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(other.items()[i].tensor.to_vector() == ps.items()[i].tensor.to_vector());

  ParameterSet<float> missing;
  missing.create("w", {3, 4}, Init::zeros(), rng2);
  CHECK_THROWS_AS(io::load_checkpoint(missing, path), InputError);
  ParameterSet<float> wrong;
  wrong.create("w", {4, 3}, Init::zeros(), rng2);
  wrong.create("b", {4}, Init::zeros(), rng2);
  CHECK_THROWS(io::load_checkpoint(wrong, path));
}

TEST_CASE("container layout is little-endian with magic and version") {
  io::Container c;
  c.kind = io::FileKind::kStack;
  c.header = {2, 1, 1};
  c.records.push_back(io::to_record("layer.1", Tensor<float>::from({2, 1}, {1.0f, -2.0f})));
  const auto bytes = io::encode_container(c);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DABS");
  CHECK(bytes[4] == io::kFormatVersion);
  CHECK(bytes[5] == 1);
  CHECK(bytes[6] == 2);  // n = 2 as u64 LE
  for (int i = 7; i < 14; ++i) CHECK(bytes[i] == 0);
  // Last four bytes: -2.0f = 0xC0000000 little-endian.
  const std::size_t e = bytes.size();
  CHECK(bytes[e - 4] == 0x00);
  CHECK(bytes[e - 1] == 0xC0);
  const auto back = io::decode_container(bytes);
  CHECK(back.records[0].data == std::vector<float>{1.0f, -2.0f});
}

TEST_CASE("decoding reports the failing byte offset") {
  io::Container c;
  c.records.push_back(io::to_record("x", Tensor<float>::from({3}, {1, 2, 3})));
  auto bytes = io::encode_container(c);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS((void)io::decode_container(bad), FormatError);
  bad = bytes;
  bad[4] = 9;
  try {
    (void)io::decode_container(bad);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }
  for (std::size_t cut : {std::size_t(3), std::size_t(10), bytes.size() - 1}) {
    std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS((void)io::decode_container(t), FormatError);
  }
}

}  // TEST_SUITE

TEST_SUITE("encoder") {

TEST_CASE("encode shape and determinism") {
  Rng rng(6);
  ParameterSet<float> ps;
  Encoder<float> enc(small_encoder(), ps, rng);
  const std::vector<int> toks{3, 4, 5, 6, 7};
  ForwardContext ctx;
  const auto a = enc.encode(toks, ctx);
  REQUIRE(a.layers() == 3);
  for (const auto& s : a.states) CHECK(s.shape() == Shape{5, 8});
  const auto b = enc.encode(toks, ctx);
  for (std::size_t l = 0; l < 3; ++l) CHECK(a.states[l].to_vector() == b.states[l].to_vector());
}

TEST_CASE("attention rows sum to one") {
  Rng rng(7);
  ParameterSet<float> ps;
  Encoder<float> enc(small_encoder(), ps, rng);
  ForwardContext ctx;
  AttentionMaps<float> maps;
  const std::vector<int> toks{2, 9, 11, 3, 3, 19, 4};
  (void)enc.encode(toks, ctx, &maps);
  REQUIRE(maps.size() == 3);
  for (const auto& layer : maps)
    for (const auto& head : layer)
      for (std::size_t r = 0; r < head.rows(); ++r) {
        double s = 0;
        for (std::size_t c = 0; c < head.cols(); ++c) s += head.at(r, c);
        CHECK(std::abs(s - 1.0) < 1e-5);
      }
}

TEST_CASE("encode rejects bad inputs") {
  Rng rng(8);
  ParameterSet<float> ps;
  Encoder<float> enc(small_encoder(), ps, rng);
  ForwardContext ctx;
  CHECK_THROWS_AS((void)enc.encode(std::vector<int>{}, ctx), InputError);
  CHECK_THROWS_AS((void)enc.encode(std::vector<int>{1, 20}, ctx), InputError);
  CHECK_THROWS_AS((void)enc.encode(std::vector<int>(13, 2), ctx), InputError);
  EncoderConfig bad = small_encoder();
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("encode is permutation sensitive") {
  Rng rng(9);
  ParameterSet<float> ps;
  Encoder<float> enc(small_encoder(), ps, rng);
  ForwardContext ctx;
  Rng draw(10);
  int differing = 0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> toks(6);
    for (auto& t : toks) t = static_cast<int>(2 + below(draw, 18));
    auto perm = toks;
    std::swap(perm[0], perm[5]);
    if (perm == toks) continue;
    const auto a = enc.encode(toks, ctx).states.back().to_vector();
    const auto b = enc.encode(perm, ctx).states.back().to_vector();
    if (a != b) ++differing;
  }
  CHECK(differing >= 9);
}

TEST_CASE("sinusoidal positions") {
  const auto p = sinusoidal_positions<double>(3, 4);
  CHECK(p.at(0, 0) == 0.0);
  CHECK(p.at(0, 1) == 1.0);
  CHECK(p.at(1, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(p.at(2, 3) == doctest::Approx(std::cos(2.0 / 100.0)));
}

TEST_CASE("stack files round trip bit exactly and reject truncation") {
  Rng rng(11);
  ParameterSet<float> ps;
  Encoder<float> enc(small_encoder(), ps, rng);
  ForwardContext ctx;
  const auto stack = enc.encode(std::vector<int>{5, 6, 7, 8}, ctx);
  const auto path = temp_path("stack.dabs");
  save_stack(stack, path.string());
  const auto back = load_stack<float>(path.string());
  REQUIRE(back.layers() == stack.layers());
  CHECK(back.n == 4);
  for (std::size_t l = 0; l < stack.layers(); ++l)
    CHECK(back.states[l].to_vector() == stack.states[l].to_vector());
  auto bytes = read_bytes(path);
  bytes.resize(bytes.size() - 7);
  const auto cut = temp_path("stack_cut.dabs");
  std::ofstream(cut, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                             static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS((void)load_stack<float>(cut.string()), FormatError);
}

}  // TEST_SUITE
