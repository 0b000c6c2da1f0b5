#include <gtest/gtest.h>

#include <cmath>

#include "fpref/core/error.hpp"
#include "fpref/model/pretrain.hpp"
#include "fpref/model/transformer.hpp"
#include "fpref/model/vocab.hpp"
#include "../support/test_support.hpp"

using namespace fpref;
using namespace fpref::model;
using fpref::testing::finite_difference;
using fpref::testing::relative_error;

namespace {

const MatrixSlot& slot(const BaseModel& m, const std::string& name) {
  for (const auto& s : m.adapted_matrices()) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("no slot " + name);
}

// Head weights zeroed: every next-token distribution is uniform.
BaseModel uniform_model(int words) {
  auto m = fpref::testing::tiny_model(3, words);
  std::vector<double> w(m.weights().values().begin(), m.weights().values().end());
  const auto& head = slot(m, "head");
  std::fill_n(w.begin() + static_cast<std::ptrdiff_t>(head.offset), head.rows * head.cols, 0.0);
  return m.with_weights(ParamVector(m.weights().layout_id(), w));
}

// All token embeddings equal, everything else zero except head row t, so
// the logits favour t at every position.
BaseModel forced_model(TokenId t) {
  auto m = fpref::testing::tiny_model(4, 4);
  const int E = m.dims().embed_dim;
  std::vector<double> w(m.weights().size(), 0.0);
  for (int v = 0; v < m.dims().vocab_size; ++v) {
    for (int e = 0; e < E; ++e) w[static_cast<std::size_t>(v * E + e)] = 1.0;
  }
  const auto& head = slot(m, "head");
  for (int e = 0; e < E; ++e) w[head.offset + static_cast<std::size_t>(t * E + e)] = 1.0;
  return m.with_weights(ParamVector(m.weights().layout_id(), w));
}

}  // namespace

TEST(Vocab, ReservedIdsAndRoundTrip) {
  std::vector<std::string> texts{"the cat sat", "a dog"};
  const auto v = Vocab::build(texts);
  EXPECT_EQ(v.token(Vocab::kBos), "<bos>");
  EXPECT_EQ(v.token(Vocab::kEos), "<eos>");
  EXPECT_EQ(v.token(Vocab::kUnk), "<unk>");
  EXPECT_EQ(v.size(), 8u);
  EXPECT_EQ(v.decode(v.encode("the cat sat")), "the cat sat");
  EXPECT_THROW(v.encode("the bird"), OutOfVocabToken);
  EXPECT_EQ(v.encode_lossy("the bird")[1], Vocab::kUnk);
  EXPECT_THROW(Vocab({"a", "b"}), InvalidArgument);
}

TEST(Vocab, FingerprintTracksTokens) {
  EXPECT_EQ(fpref::testing::word_vocab(3).fingerprint(), fpref::testing::word_vocab(3).fingerprint());
  EXPECT_NE(fpref::testing::word_vocab(3).fingerprint(), fpref::testing::word_vocab(4).fingerprint());
}

TEST(BaseModel, LayoutIds) {
  const auto m = fpref::testing::tiny_model(1, 5, {0, 16, 8, 16, 1}, {2, 4.0});
  EXPECT_EQ(m.weights().layout_id(), "base/v8-t16-d8-h16-l1");
  EXPECT_EQ(m.adapter_layout_id(), "lora/v8-t16-d8-h16-l1-r2");
  // q, k, v, o: 2*(8+8) each; mlp_in, mlp_out: 2*(16+8) each; head: 2*(8+8).
  EXPECT_EQ(m.adapter_size(), 4u * 32u + 2u * 48u + 32u);
  EXPECT_EQ(m.adapted_matrices().size(), 7u);
}

TEST(BaseModel, RejectsBadShapes) {
  EXPECT_THROW(fpref::testing::tiny_model(1, 5, {0, 16, 8, 16, 1}, {9, 4.0}), InvalidArgument);
  auto m = fpref::testing::tiny_model(1);
  EXPECT_THROW(m.with_weights(ParamVector("other", {1.0})), LayoutMismatch);
}

TEST(ResponseLogprob, UniformLogitsGiveThreeLnQuarter) {
  const auto m = uniform_model(1);  // |V| = 4
  ASSERT_EQ(m.dims().vocab_size, 4);
  const std::vector<TokenId> prompt{3}, response{3, 1, 2};
  const double lp = response_logprob(m, m.zero_adapters(), prompt, response);
  EXPECT_NEAR(lp, 3.0 * std::log(0.25), 1e-12);
  EXPECT_NEAR(lp, -4.1589, 1e-4);
}

TEST(ResponseLogprob, InitialisedAdaptersEqualBaseExactly) {
  const auto m = fpref::testing::tiny_model(2);
  RngStream rng(8);
  const auto a = m.init_adapters(rng);
  const std::vector<TokenId> prompt{3, 4}, response{5, 6, 1};
  EXPECT_EQ(response_logprob(m, a, prompt, response), base_response_logprob(m, prompt, response));
  EXPECT_EQ(AdaptedModel(m, a).next_token_logits(prompt), AdaptedModel(m).next_token_logits(prompt));
}

TEST(ResponseLogprob, MatchesChainRuleEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = fpref::testing::tiny_model(seed, 5, {0, 16, 8, 16, 2});
    const auto a = fpref::testing::random_adapters(m, seed + 100);
    RngStream rng(seed);
    const auto prompt = fpref::testing::random_tokens(rng, 3, m.dims().vocab_size);
    const auto response = fpref::testing::random_tokens(rng, 4, m.dims().vocab_size);
    const AdaptedModel policy(m, a);
    const double direct = fpref::testing::chain_rule_logprob(policy, prompt, response);
    EXPECT_NEAR(policy.response_logprob(prompt, response), direct, 1e-10);
    EXPECT_LE(policy.response_logprob(prompt, response), 0.0);
  }
}

TEST(ResponseLogprob, Errors) {
  const auto m = fpref::testing::tiny_model(1);  // context 16
  const auto a = m.zero_adapters();
  std::vector<TokenId> prompt(10, 3), response(7, 4);
  EXPECT_THROW(response_logprob(m, a, prompt, response), ContextOverflow);
  response.resize(6);
  EXPECT_NO_THROW(response_logprob(m, a, prompt, response));
  EXPECT_THROW(response_logprob(m, a, prompt, std::vector<TokenId>{}), InvalidArgument);
  EXPECT_THROW(response_logprob(m, a, prompt, std::vector<TokenId>{99}), OutOfVocabToken);
  EXPECT_THROW(response_logprob(m, ParamVector("x", {}), prompt, response), LayoutMismatch);
}

TEST(LogprobGrad, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = fpref::testing::tiny_model(seed, 5, {0, 16, 8, 16, 1});
    const auto a = fpref::testing::random_adapters(m, seed + 7);
    RngStream rng(seed + 40);
    const auto prompt = fpref::testing::random_tokens(rng, 2 + seed % 3, m.dims().vocab_size);
    const auto response = fpref::testing::random_tokens(rng, 1 + seed % 4, m.dims().vocab_size);
    const auto an = logprob_grad(m, a, prompt, response);
    EXPECT_DOUBLE_EQ(an.value, response_logprob(m, a, prompt, response));
    EXPECT_EQ(an.grad.layout_id(), m.adapter_layout_id());
    const auto fd = finite_difference(
        [&](const ParamVector& x) { return response_logprob(m, x, prompt, response); }, a);
    EXPECT_LT(relative_error(an.grad.values(), fd), 1e-4);
  }
}

TEST(LogprobGrad, EmptyPromptSingleToken) {
  const auto m = fpref::testing::tiny_model(12);
  const auto a = fpref::testing::random_adapters(m, 13);
  const std::vector<TokenId> prompt, response{4};
  const auto an = logprob_grad(m, a, prompt, response);
  const auto fd = finite_difference(
      [&](const ParamVector& x) { return response_logprob(m, x, prompt, response); }, a);
  EXPECT_LT(relative_error(an.grad.values(), fd), 1e-4);
}

TEST(LogprobGrad, BaseWeightsUntouched) {
  const auto m = fpref::testing::tiny_model(14);
  const auto before = m.weights();
  (void)logprob_grad(m, fpref::testing::random_adapters(m, 15), std::vector<TokenId>{3},
                     std::vector<TokenId>{4, 5});
  EXPECT_EQ(m.weights(), before);
}

TEST(Lora, DoublingAlphaDoublesTheLowRankTerm) {
  const auto m = fpref::testing::tiny_model(20, 5, {0, 16, 8, 16, 1}, {2, 4.0});
  const auto m2 = m.with_lora({2, 8.0});
  const auto a = fpref::testing::random_adapters(m, 21);
  // Doubling every B block at the original alpha is the same model.
  std::vector<double> v(a.values().begin(), a.values().end());
  for (const auto& s : m.adapted_matrices()) {
    const std::size_t b0 = s.adapter_offset + static_cast<std::size_t>(2 * s.cols);
    for (std::size_t i = 0; i < static_cast<std::size_t>(s.rows * 2); ++i) v[b0 + i] *= 2.0;
  }
  const ParamVector doubled_b(a.layout_id(), v);
  const std::vector<TokenId> prompt{3, 4}, response{5, 6};
  EXPECT_NEAR(response_logprob(m2, a, prompt, response),
              response_logprob(m, doubled_b, prompt, response), 1e-12);
}

TEST(SampleResponse, GreedyFollowsForcedToken) {
  const auto m = forced_model(5);
  RngStream rng(1);
  SamplingConfig cfg{6, 0.0};
  const auto out = sample_response(m, m.zero_adapters(), std::vector<TokenId>{3}, cfg, rng);
  EXPECT_EQ(out, std::vector<TokenId>(6, 5));
}

TEST(SampleResponse, StopsAtEos) {
  const auto m = forced_model(Vocab::kEos);
  RngStream rng(1);
  EXPECT_TRUE(sample_response(m, m.zero_adapters(), std::vector<TokenId>{3}, {6, 0.0}, rng).empty());
}

TEST(SampleResponse, StopsWhenContextIsFull) {
  const auto m = forced_model(5);  // context 16
  RngStream rng(1);
  const std::vector<TokenId> prompt(10, 3);
  const auto out = sample_response(m, m.zero_adapters(), prompt, {100, 0.0}, rng);
  EXPECT_EQ(out.size(), 6u);
  EXPECT_THROW(sample_response(m, m.zero_adapters(), std::vector<TokenId>(16, 3), {4, 0.0}, rng),
               ContextOverflow);
}

TEST(SampleResponse, SameStreamSameOutput) {
  const auto m = fpref::testing::tiny_model(30, 6);
  const auto a = fpref::testing::random_adapters(m, 31);
  RngStream r1 = RngStream(5).derive("eval", 0), r2 = RngStream(5).derive("eval", 0);
  const std::vector<TokenId> prompt{3};
  EXPECT_EQ(sample_response(m, a, prompt, {10, 1.0}, r1), sample_response(m, a, prompt, {10, 1.0}, r2));
}

TEST(SampleResponse, UniformFrequencies) {
  const auto m = uniform_model(1);  // |V| = 4
  const auto a = m.zero_adapters();
  RngStream rng(99);
  const int n = 10000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) {
    const auto out = sample_response(m, a, std::vector<TokenId>{3}, {1, 1.0}, rng);
    // An empty response means <eos> was drawn.
    counts[out.empty() ? Vocab::kEos : static_cast<std::size_t>(out[0])]++;
  }
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 0.25, 3.0 * sigma);
}

TEST(Pretrain, LowersNextTokenLoss) {
  data::FederatedPairDataset corpus;
  for (std::size_t i = 0; i < 6; ++i) {
    corpus.clients["a"].push_back({"say hello", "hello there friend", "go away", "a", i});
  }
  PretrainConfig cfg;
  cfg.steps = 0;
  ModelDims dims{0, 16, 8, 16, 1};
  const auto init = build_base_model(corpus, dims, {2, 4.0}, cfg, 3);
  cfg.steps = 80;
  const auto trained = build_base_model(corpus, dims, {2, 4.0}, cfg, 3);
  std::vector<std::vector<TokenId>> seqs;
  std::vector<TokenId> s{Vocab::kBos};
  for (auto t : trained.vocab().encode("say hello hello there friend")) s.push_back(t);
  s.push_back(Vocab::kEos);
  seqs.push_back(s);
  EXPECT_LT(mean_token_nll(trained, seqs), mean_token_nll(init, seqs));
  EXPECT_EQ(build_base_model(corpus, dims, {2, 4.0}, cfg, 3).weights(), trained.weights());
}

TEST(SequenceGrad, MatchesFiniteDifferencesOnBaseWeights) {
  const auto m = fpref::testing::tiny_model(40, 3, {0, 8, 4, 8, 1}, {1, 2.0});
  const std::vector<TokenId> seq{Vocab::kBos, 3, 4, 5, Vocab::kEos};
  const auto an = sequence_logprob_base_grad(m, seq);
  const auto fd = finite_difference(
      [&](const ParamVector& w) {
        return sequence_logprob_base_grad(m.with_weights(w), seq).logprob;
      },
      m.weights());
  EXPECT_EQ(an.predicted, 4u);
  EXPECT_LT(relative_error(an.grad.values(), fd), 1e-4);
}
