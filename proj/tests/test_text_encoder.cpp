#include <doctest.h>

#include <cmath>

#include "mvan/gradcheck.hpp"
#include "mvan/text_encoder.hpp"

using namespace mvan;
using ad::Tape;
using ad::Var;

namespace {

struct ScalarGru {
  Tape tape;
  text::GruVars p;
  explicit ScalarGru(double u_z = 0.0) {
    auto c = [&](double v) { return tape.constant(Tensor::scalar(v)); };
    p = {c(u_z), c(0), c(0), c(0), c(0), c(0)};
  }
};

// Plain-loop GRU step used as the reference.
std::vector<double> gru_reference(const std::vector<double>& x, const std::vector<double>& h,
                                  const std::array<Tensor, 6>& w) {
  const std::size_t H = h.size();
  auto proj = [](const std::vector<double>& v, const Tensor& m, std::size_t j) {
    double s = 0;
    for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * m(k, j);
    return s;
  };
  std::vector<double> z(H), r(H), hr(H), out(H);
  for (std::size_t j = 0; j < H; ++j) {
    z[j] = 1.0 / (1.0 + std::exp(-(proj(x, w[0], j) + proj(h, w[3], j))));
    r[j] = 1.0 / (1.0 + std::exp(-(proj(x, w[1], j) + proj(h, w[4], j))));
  }
  for (std::size_t j = 0; j < H; ++j) hr[j] = h[j] * r[j];
  for (std::size_t j = 0; j < H; ++j) {
    const double ht = std::tanh(proj(x, w[2], j) + proj(hr, w[5], j));
    out[j] = (1.0 - z[j]) * h[j] + z[j] * ht;
  }
  return out;
}

TextEncoderConfig small_config() {
  TextEncoderConfig cfg;
  cfg.embedding_dim = 3;
  cfg.hidden_size = 4;
  cfg.layers = 2;
  cfg.attention_dim = 3;
  cfg.max_len = 8;
  return cfg;
}

ParameterStore small_params(const TextEncoderConfig& cfg, std::size_t vocab, std::uint64_t seed) {
  ParameterStore p;
  Rng rng(seed);
  text::init_params(p, cfg, vocab, true, rng);
  // Embedding rows drawn from +-0.05 keep the recurrence in its linear range;
  // widen them so the checks exercise the nonlinearities.
  Rng wide(seed + 1);
  Tensor& e = p.at(text::kEmbeddingName);
  for (std::size_t r = 1; r < e.rows(); ++r)
    for (std::size_t c = 0; c < e.cols(); ++c) e(r, c) = wide.uniform(-1.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("gru_cell closed forms") {
  {
    ScalarGru g;
    Var h = text::gru_cell(g.tape.constant(Tensor::scalar(0.3)), g.tape.constant(Tensor::scalar(1.0)), g.p);
    CHECK(h.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  {
    ScalarGru g;
    Var h = text::gru_cell(g.tape.constant(Tensor::scalar(0.3)), g.tape.constant(Tensor::scalar(0.0)), g.p);
    CHECK(h.value()[0] == 0.0);
  }
  {
    ScalarGru g(1000.0);
    Var h = text::gru_cell(g.tape.constant(Tensor::scalar(1.0)), g.tape.constant(Tensor::scalar(0.7)), g.p);
    CHECK(std::abs(h.value()[0]) < 1e-12);
  }
}

TEST_CASE("gru_cell matches the plain-loop reference") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::array<Tensor, 6> w;
    for (int k = 0; k < 3; ++k) w[k] = uniform_tensor({3, 4}, -1, 1, rng);
    for (int k = 3; k < 6; ++k) w[k] = uniform_tensor({4, 4}, -1, 1, rng);
    Tensor x = uniform_tensor({1, 3}, -1, 1, rng), h = uniform_tensor({1, 4}, -1, 1, rng);
    Tape tape;
    text::GruVars p{tape.constant(w[0]), tape.constant(w[1]), tape.constant(w[2]),
                    tape.constant(w[3]), tape.constant(w[4]), tape.constant(w[5])};
    const Tensor& got = text::gru_cell(tape.constant(x), tape.constant(h), p).value();
    auto want = gru_reference(x.data(), h.data(), w);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(got[j] - want[j]) < 1e-14);
  }
}

TEST_CASE("gru_cell rejects mismatched dims") {
  ScalarGru g;
  CHECK_THROWS_AS(text::gru_cell(g.tape.constant(Tensor::matrix(1, 2)), g.tape.constant(Tensor::scalar(0)), g.p),
                  NumericError);
}

TEST_CASE("bigru structure") {
  TextEncoderConfig cfg = small_config();
  ParameterStore p = small_params(cfg, 6, 1);
  const std::vector<std::size_t> seq{2, 0, 0, 0};

  Tape tape;
  ForwardContext ctx{tape, p};
  Tensor H = text::bigru_encode_padded(ctx, seq, 1, cfg.layers);
  CHECK(H.rows() == 4);
  CHECK(H.cols() == 8);
  double row0 = 0;
  for (std::size_t c = 0; c < 8; ++c) row0 += std::abs(H(0, c));
  CHECK(row0 > 0.0);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(H(r, c) == 0.0);

  CHECK_THROWS(text::bigru_encode(ctx, seq, 0, cfg.layers));
}

TEST_CASE("zero embeddings and zero weights give zero states") {
  TextEncoderConfig cfg = small_config();
  ParameterStore p;
  Rng rng(1);
  text::init_params(p, cfg, 5, true, rng);
  for (auto& [name, t] : p)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  Tape tape;
  ForwardContext ctx{tape, p};
  const std::vector<std::size_t> seq{2, 3, 4, 0};
  Tensor H = text::bigru_encode_padded(ctx, seq, 3, cfg.layers);
  for (double v : H.data()) CHECK(v == 0.0);
}

TEST_CASE("pad tokens never reach the recurrence") {
  TextEncoderConfig cfg = small_config();
  ParameterStore p = small_params(cfg, 8, 2);
  std::vector<std::size_t> short_seq{3, 5, 7, 0};
  std::vector<std::size_t> long_seq{3, 5, 7, 0, 0, 0, 0, 0, 0, 0};
  Tape t1, t2;
  ForwardContext c1{t1, p}, c2{t2, p};
  Tensor a = text::bigru_encode_padded(c1, short_seq, 3, cfg.layers);
  Tensor b = text::bigru_encode_padded(c2, long_seq, 3, cfg.layers);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) CHECK(a(r, c) == b(r, c));

  TextEncoderConfig long_cfg = cfg;
  long_cfg.max_len = 10;
  auto ea = text::encode(c1, cfg, short_seq, 3, true);
  auto eb = text::encode(c2, long_cfg, long_seq, 3, true);
  CHECK(ea.vector.value() == eb.vector.value());
  CHECK(ea.weights->value() == eb.weights->value());
  auto pw = text::padded_weights(eb.weights->value(), 10);
  for (std::size_t i = 3; i < 10; ++i) CHECK(pw[i] == 0.0);
}

TEST_CASE("word attention examples") {
  SUBCASE("identical rows give uniform weights") {
    Tape tape;
    Rng rng(4);
    Tensor row = uniform_tensor({1, 4}, -1, 1, rng);
    Tensor H = Tensor::matrix(5, 4);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 4; ++c) H(r, c) = row(0, c);
    text::AttentionVars p{tape.constant(uniform_tensor({4, 3}, -1, 1, rng)), tape.constant(Tensor::matrix(1, 3, 0.2)),
                          tape.constant(uniform_tensor({3, 1}, -1, 1, rng))};
    auto a = text::word_attention(tape.constant(H), p);
    for (std::size_t t = 0; t < 5; ++t) CHECK(a.weights.value()[t] == doctest::Approx(0.2).epsilon(1e-14));
    for (std::size_t c = 0; c < 4; ++c) CHECK(a.sentence.value()[c] == doctest::Approx(row[c]).epsilon(1e-14));
  }
  SUBCASE("single token") {
    Tape tape;
    Rng rng(5);
    Tensor H = uniform_tensor({1, 4}, -1, 1, rng);
    text::AttentionVars p{tape.constant(uniform_tensor({4, 3}, -1, 1, rng)), tape.constant(Tensor::matrix(1, 3)),
                          tape.constant(uniform_tensor({3, 1}, -1, 1, rng))};
    auto a = text::word_attention(tape.constant(H), p);
    CHECK(a.weights.value()[0] == 1.0);
    CHECK(a.sentence.value() == H);
  }
  SUBCASE("engineered scores 1,2,3") {
    // One attention unit: u_t = tanh(h_t0), u_w = 10, so rows with
    // h_t0 = atanh(0.1 t) score exactly t.
    Tape tape;
    Tensor H = Tensor::from_rows({{std::atanh(0.1), 5.0}, {std::atanh(0.2), -1.0}, {std::atanh(0.3), 2.0}});
    text::AttentionVars p{tape.constant(Tensor::from_rows({{1.0}, {0.0}})), tape.constant(Tensor::matrix(1, 1)),
                          tape.constant(Tensor::scalar(10.0))};
    auto a = text::word_attention(tape.constant(H), p);
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    const double w[3] = {std::exp(1.0) / z, std::exp(2.0) / z, std::exp(3.0) / z};
    CHECK(a.weights.value()[0] == doctest::Approx(0.0900).epsilon(1e-3));
    CHECK(a.weights.value()[1] == doctest::Approx(0.2447).epsilon(1e-3));
    CHECK(a.weights.value()[2] == doctest::Approx(0.6652).epsilon(1e-3));
    for (std::size_t c = 0; c < 2; ++c) {
      const double s = w[0] * H(0, c) + w[1] * H(1, c) + w[2] * H(2, c);
      CHECK(a.sentence.value()[c] == doctest::Approx(s).epsilon(1e-12));
    }
  }
}

TEST_CASE("raising one score raises its weight") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor H = uniform_tensor({5, 2}, -1.5, 1.5, rng);
    const std::size_t t = rng.below(5);
    Tape tape;
    text::AttentionVars p{tape.constant(Tensor::from_rows({{1.0}, {0.0}})), tape.constant(Tensor::matrix(1, 1)),
                          tape.constant(Tensor::scalar(2.0))};
    auto before = text::word_attention(tape.constant(H), p).weights.value()[t];
    H(t, 0) += 0.25;
    auto after = text::word_attention(tape.constant(H), p).weights.value()[t];
    CHECK(after > before);
  }
}

TEST_CASE("attention weights are normalized") {
  TextEncoderConfig cfg = small_config();
  ParameterStore p = small_params(cfg, 10, 8);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t len = 1 + rng.below(cfg.max_len);
    std::vector<std::size_t> seq(cfg.max_len, 0);
    for (std::size_t i = 0; i < len; ++i) seq[i] = 1 + rng.below(9);
    Tape tape;
    ForwardContext ctx{tape, p};
    auto enc = text::encode(ctx, cfg, seq, len, true);
    auto w = text::padded_weights(enc.weights->value(), cfg.max_len);
    double total = 0;
    for (std::size_t i = 0; i < cfg.max_len; ++i) {
      CHECK(w[i] >= 0.0);
      if (i >= len) CHECK(w[i] == 0.0);
      total += w[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("text encoder gradients match finite differences") {
  TextEncoderConfig cfg = small_config();
  ParameterStore p = small_params(cfg, 7, 12);
  const std::vector<std::size_t> seq{2, 4, 6, 3, 5, 0, 0, 0};
  Rng wr(13);
  Tensor readout = uniform_tensor({1, 8}, -1, 1, wr);
  auto r = check_gradients(p, [&](Tape& tape, const ParameterStore& ps) {
    ForwardContext ctx{tape, ps};
    auto enc = text::encode(ctx, cfg, seq, 5, true);
    return ad::sum(ad::mul_const(enc.vector, readout));
  });
  INFO(r.worst << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("mean pooling without attention") {
  TextEncoderConfig cfg = small_config();
  ParameterStore p = small_params(cfg, 7, 14);
  const std::vector<std::size_t> seq{2, 4, 6, 0, 0, 0, 0, 0};
  Tape tape;
  ForwardContext ctx{tape, p};
  auto enc = text::encode(ctx, cfg, seq, 3, false);
  CHECK(!enc.weights);
  Tensor H = text::bigru_encode_padded(ctx, seq, 3, cfg.layers);
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(enc.vector.value()[c] == doctest::Approx((H(0, c) + H(1, c) + H(2, c)) / 3.0).epsilon(1e-14));
}
