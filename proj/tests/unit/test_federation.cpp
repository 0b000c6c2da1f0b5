#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fpref/core/error.hpp"
#include "fpref/data/synthetic.hpp"
#include "fpref/federation/orchestrator.hpp"
#include "fpref/model/pretrain.hpp"

using namespace fpref;
using namespace fpref::fed;

namespace {

struct Setup {
  data::FederatedPairDataset corpus;
  model::BaseModel model;
};

const Setup& setup() {
  static const Setup s = [] {
    data::SyntheticCorpusSpec spec;
    spec.clients = 3;
    spec.min_pairs_per_client = 3;
    spec.max_pairs_per_client = 5;
    spec.seed = 5;
    auto corpus = data::make_marker_corpus(spec);
    model::PretrainConfig pre;
    pre.steps = 20;
    model::ModelDims dims{0, 64, 8, 16, 1};
    auto m = model::build_base_model(corpus, dims, {2, 4.0}, pre, 5);
    return Setup{std::move(corpus), std::move(m)};
  }();
  return s;
}

RunConfig small_config(Method method, AggregatorKind agg, int rounds) {
  RunConfig cfg;
  cfg.method = method;
  cfg.aggregator = agg;
  cfg.rounds = rounds;
  cfg.local.steps = 2;
  cfg.local.batch_size = 2;
  cfg.local.lr = 5e-3;
  cfg.probe_size = 4;
  return cfg;
}

TokenLimits limits_of(const RunConfig& cfg) {
  return {static_cast<std::size_t>(cfg.model.max_prompt_tokens),
          static_cast<std::size_t>(cfg.model.max_response_tokens)};
}

ParamVector random_global(const model::BaseModel& m, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> v(m.adapter_size());
  for (auto& x : v) x = 0.1 * rng.next_normal();
  return ParamVector(m.adapter_layout_id(), std::move(v));
}

}  // namespace

TEST(Tokenize, ClipsAndMapsUnknownWords) {
  const auto v = model::Vocab::build(std::vector<std::string>{"a b c d e"});
  const TokenLimits lim{2, 3};
  const auto t = tokenize(v, PreferencePair{"a b c", "a b c d e", "", "k", 0}, lim);
  EXPECT_EQ(t.prompt, v.encode("b c"));
  EXPECT_EQ(t.chosen, v.encode("a b c"));
  EXPECT_EQ(t.rejected, std::vector<model::TokenId>{model::Vocab::kEos});
  const auto f = tokenize(v, FeedbackExample{"zzz a", "b", Label::kUndesirable, "k", 0}, lim);
  EXPECT_EQ(f.prompt, (std::vector<model::TokenId>{model::Vocab::kUnk, v.encode("a")[0]}));
  EXPECT_EQ(f.label, Label::kUndesirable);
}

TEST(LocalTrain, ZeroStepsGivesZeroDelta) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kScaffold, 1);
  cfg.local.steps = 0;
  const auto clients = make_clients(s.model.vocab(), s.corpus, limits_of(cfg));
  const auto g = random_global(s.model, 1);
  const auto u = local_train(s.model, clients[0], g, g, nullptr, RngStream(3),
                             {cfg.method, cfg.aggregator, cfg.local, cfg.loss});
  EXPECT_EQ(u.delta, ParamVector::zeros(g.layout_id(), g.size()));
  EXPECT_EQ(u.n_examples, clients[0].size());
  ASSERT_TRUE(u.cv_delta);
  EXPECT_EQ(l2_norm(*u.cv_delta), 0.0);
}

TEST(LocalTrain, FedProxWithZeroMuIsFedAvg) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kFedAvg, 1);
  const auto clients = make_clients(s.model.vocab(), s.corpus, limits_of(cfg));
  const auto g = random_global(s.model, 2);
  const auto ref = random_global(s.model, 3);
  LocalTrainOptions avg{cfg.method, AggregatorKind::kFedAvg, cfg.local, cfg.loss};
  LocalTrainOptions prox{cfg.method, AggregatorKind::kFedProx, cfg.local, cfg.loss};
  prox.local.prox_mu = 0.0;
  const auto a = local_train(s.model, clients[1], g, ref, nullptr, RngStream(4), avg);
  const auto b = local_train(s.model, clients[1], g, ref, nullptr, RngStream(4), prox);
  EXPECT_EQ(a.delta, b.delta);
  EXPECT_EQ(a.mean_loss, b.mean_loss);
  prox.local.prox_mu = 10.0;
  EXPECT_NE(local_train(s.model, clients[1], g, ref, nullptr, RngStream(4), prox).delta, a.delta);
}

TEST(LocalTrain, ScaffoldSgdOneStepIsNegativeLrTimesGradient) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kScaffold, 1);
  cfg.local.optimizer = LocalOptimizer::kSgd;
  cfg.local.steps = 1;
  cfg.local.batch_size = 1;
  cfg.local.lr = 0.05;
  data::FederatedPairDataset one;
  one.clients["solo"] = {s.corpus.clients.begin()->second.front()};
  auto clients = make_clients(s.model.vocab(), one, limits_of(cfg));
  clients[0].control_variate = ParamVector::zeros(s.model.adapter_layout_id(), s.model.adapter_size());
  const auto c = ParamVector::zeros(s.model.adapter_layout_id(), s.model.adapter_size());
  const auto g = random_global(s.model, 6);
  const auto ref = random_global(s.model, 7);
  const auto u = local_train(s.model, clients[0], g, ref, &c, RngStream(8),
                             {cfg.method, cfg.aggregator, cfg.local, cfg.loss});

  losses::DpoBatch batch;
  batch.beta = cfg.loss.beta;
  batch.items = std::get<std::vector<losses::TokenizedPair>>(clients[0].records);
  const auto lg = losses::dpo_loss_and_grad(s.model, g, ref, batch);
  const auto expected = scale(-0.05, lg.grad);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(u.delta[i], expected[i], 1e-15);
  // c_i+ - c_i = (global - w) / (K lr) = g
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR((*u.cv_delta)[i], lg.grad[i], 1e-12);
}

TEST(LocalTrain, MethodAndDataMustAgree) {
  const auto& s = setup();
  auto cfg = small_config(Method::kKto, AggregatorKind::kFedAvg, 1);
  const auto pairs = make_clients(s.model.vocab(), s.corpus, limits_of(cfg));
  const auto fb = make_clients(s.model.vocab(), data::split_pairs(s.corpus), limits_of(cfg));
  const auto g = random_global(s.model, 9);
  EXPECT_THROW(local_train(s.model, pairs[0], g, g, nullptr, RngStream(1),
                           {Method::kKto, cfg.aggregator, cfg.local, cfg.loss}),
               InvalidConfig);
  EXPECT_THROW(local_train(s.model, fb[0], g, g, nullptr, RngStream(1),
                           {Method::kDpo, cfg.aggregator, cfg.local, cfg.loss}),
               DpoRequiresPairs);
  ClientState empty{"e", std::vector<losses::TokenizedPair>{}, std::nullopt};
  EXPECT_THROW(local_train(s.model, empty, g, g, nullptr, RngStream(1),
                           {Method::kDpo, cfg.aggregator, cfg.local, cfg.loss}),
               EmptyClient);
}

TEST(Orchestrator, SingleClientMatchesManualLoop) {
  const auto& s = setup();
  auto cfg = small_config(Method::kKto, AggregatorKind::kFedAvg, 3);
  data::FederatedPairDataset one;
  one.clients["solo"] = s.corpus.clients.begin()->second;
  const auto data = prepare_training_data(cfg, one);
  const auto art = run_rounds(cfg, data, s.model);

  const auto clients = make_clients(s.model.vocab(), std::get<data::FederatedFeedbackDataset>(data),
                                    limits_of(cfg));
  const RngStream root(cfg.root_seed);
  auto arng = root.derive("adapters", 0);
  const auto reference = s.model.init_adapters(arng);
  ParamVector w = reference;
  for (int r = 1; r <= cfg.rounds; ++r) {
    const auto u = local_train(s.model, clients[0], w, reference, nullptr,
                               root.derive("round", r).derive("client", 0),
                               {cfg.method, cfg.aggregator, cfg.local, cfg.loss});
    w = add(w, u.delta);
    EXPECT_EQ(art.metrics[static_cast<std::size_t>(r - 1)].mean_client_loss, u.mean_loss);
  }
  EXPECT_EQ(art.reference, reference);
  EXPECT_EQ(art.final_adapters, w);
  EXPECT_EQ(art.final_state.round, 3u);
}

TEST(Orchestrator, WorkerCountDoesNotChangeResults) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kFedAdam, 3);
  const auto data = prepare_training_data(cfg, s.corpus);
  const auto a = run_rounds(cfg, data, s.model);
  cfg.workers = 3;
  const auto b = run_rounds(cfg, data, s.model);
  EXPECT_EQ(a.final_adapters, b.final_adapters);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].to_json_line(), b.metrics[i].to_json_line());
  }
}

TEST(Orchestrator, SamplesCeilFractionOfClients) {
  const auto& s = setup();
  auto cfg = small_config(Method::kKto, AggregatorKind::kFedAvgM, 4);
  cfg.clients_fraction = 0.5;  // ceil(1.5) = 2 of 3
  const auto data = prepare_training_data(cfg, s.corpus);
  std::vector<std::vector<std::size_t>> seen;
  run_rounds(cfg, data, s.model, [&](const RoundView& v) {
    seen.emplace_back(v.sampled.begin(), v.sampled.end());
    EXPECT_EQ(v.clients.size(), 3u);
    EXPECT_EQ(v.server.global_adapters.layout_id(), s.model.adapter_layout_id());
  });
  ASSERT_EQ(seen.size(), 4u);
  for (const auto& round : seen) {
    ASSERT_EQ(round.size(), 2u);
    EXPECT_LT(round[0], round[1]);
  }
  std::vector<std::vector<std::size_t>> again;
  run_rounds(cfg, data, s.model, [&](const RoundView& v) { again.emplace_back(v.sampled.begin(), v.sampled.end()); });
  EXPECT_EQ(seen, again);
}

TEST(Orchestrator, MetricsLineKeyOrder) {
  RoundMetrics m{2, "fedavg", "kto", 0.5, 0.25, 0.125};
  EXPECT_EQ(m.to_json_line(),
            R"({"round":2,"algo":"fedavg","method":"kto","mean_client_loss":0.5,"update_norm":0.25,"probe_loss":0.125})");
  EXPECT_EQ(m.to_json()["probe_loss"], 0.125);
}

TEST(Orchestrator, ReferenceStaysFixed) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kFedAvg, 2);
  const auto data = prepare_training_data(cfg, s.corpus);
  const auto art = run_rounds(cfg, data, s.model);
  RngStream arng = RngStream(cfg.root_seed).derive("adapters", 0);
  EXPECT_EQ(art.reference, s.model.init_adapters(arng));
  EXPECT_NE(art.final_adapters, art.reference);
}

TEST(Orchestrator, NonFiniteBecomesNumericalError) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kFedAvg, 3);
  cfg.local.lr = 1e300;  // Adam moves every coordinate by about lr
  try {
    run_rounds(cfg, prepare_training_data(cfg, s.corpus), s.model);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_GE(e.round(), 1u);
    EXPECT_LE(e.round(), 3u);
  }
}

TEST(Applicability, DpoNeedsOriginalPairs) {
  const auto& s = setup();
  auto cfg = small_config(Method::kDpo, AggregatorKind::kFedAvg, 1);
  EXPECT_NO_THROW(check_applicability(cfg, prepare_training_data(cfg, s.corpus)));
  EXPECT_THROW(check_applicability(cfg, FederatedData(data::split_pairs(s.corpus))), DpoRequiresPairs);
  cfg.data_mode = DataMode::kRedistributed;
  EXPECT_THROW(prepare_training_data(cfg, s.corpus), DpoRequiresPairs);
  EXPECT_THROW(run_rounds(cfg, FederatedData(s.corpus), s.model), DpoRequiresPairs);
}

TEST(Applicability, KtoRedistributedRuns) {
  const auto& s = setup();
  auto cfg = small_config(Method::kKto, AggregatorKind::kFedAvgM, 1);
  cfg.data_mode = DataMode::kRedistributed;
  const auto data = prepare_training_data(cfg, s.corpus);
  const auto& fb = std::get<data::FederatedFeedbackDataset>(data);
  EXPECT_EQ(fb, data::redistribute(data::split_pairs(s.corpus), cfg.redistribute_seed));
  EXPECT_EQ(run_rounds(cfg, data, s.model).metrics.size(), 1u);
  EXPECT_THROW(check_applicability(cfg, FederatedData(s.corpus)), InvalidConfig);
}
