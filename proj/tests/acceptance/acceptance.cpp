// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpref/cli/cli.hpp"
#include "fpref/core/error.hpp"
#include "fpref/data/dataset.hpp"
#include "fpref/data/synthetic.hpp"
#include "fpref/eval/report.hpp"
#include "fpref/federation/aggregator.hpp"
#include "fpref/federation/client.hpp"
#include "fpref/federation/orchestrator.hpp"
#include "fpref/losses/losses.hpp"
#include "fpref/model/pretrain.hpp"
#include "../support/test_support.hpp"

namespace fs = std::filesystem;
using namespace fpref;
using fpref::testing::finite_difference;
using fpref::testing::relative_error;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// --- 1: gradients vs central differences ---------------------------------

struct Instance {
  model::BaseModel model;
  ParamVector adapters;
  ParamVector reference;
  RngStream rng;
};

Instance random_instance(std::uint64_t seed) {
  RngStream rng = RngStream(seed).derive("grad-instance", 0);
  const int words = 3 + static_cast<int>(rng.next_below(4));
  model::ModelDims dims;
  dims.context_len = 12;
  dims.embed_dim = rng.next_below(2) ? 8 : 4;
  dims.hidden_dim = rng.next_below(2) ? 16 : 8;
  dims.n_layers = 1 + static_cast<int>(rng.next_below(2));
  model::LoraConfig lora{1 + static_cast<int>(rng.next_below(2)), 1.0 + 4.0 * rng.next_double()};
  auto m = fpref::testing::tiny_model(seed, words, dims, lora, 0.5);
  auto a = fpref::testing::random_adapters(m, seed * 2 + 1, 0.3);
  auto r = fpref::testing::random_adapters(m, seed * 2 + 2, 0.3);
  return {std::move(m), std::move(a), std::move(r), rng};
}

losses::TokenizedPair random_pair(RngStream& rng, int v) {
  losses::TokenizedPair p;
  p.prompt = fpref::testing::random_tokens(rng, rng.next_below(4), v);
  p.chosen = fpref::testing::random_tokens(rng, 1 + rng.next_below(4), v);
  p.rejected = fpref::testing::random_tokens(rng, 1 + rng.next_below(4), v);
  return p;
}

losses::TokenizedFeedback random_feedback(RngStream& rng, int v) {
  losses::TokenizedFeedback f;
  f.prompt = fpref::testing::random_tokens(rng, rng.next_below(4), v);
  f.response = fpref::testing::random_tokens(rng, 1 + rng.next_below(4), v);
  f.label = rng.next_below(2) ? Label::kDesirable : Label::kUndesirable;
  return f;
}

Outcome criterion_gradients() {
  Outcome out;
  const auto t0 = Clock::now();
  constexpr int kInstances = 100;
  double worst_lp = 0.0, worst_dpo = 0.0, worst_kto = 0.0;
  int bad_lp = 0, bad_dpo = 0, bad_kto = 0;
  for (int i = 0; i < kInstances; ++i) {
    auto inst = random_instance(1000 + static_cast<std::uint64_t>(i));
    const int v = inst.model.dims().vocab_size;
    const auto& m = inst.model;

    {
      auto prompt = fpref::testing::random_tokens(inst.rng, inst.rng.next_below(5), v);
      auto resp = fpref::testing::random_tokens(inst.rng, 1 + inst.rng.next_below(5), v);
      const auto an = model::logprob_grad(m, inst.adapters, prompt, resp);
      const auto fd = finite_difference(
          [&](const ParamVector& a) { return model::response_logprob(m, a, prompt, resp); },
          inst.adapters);
      const double e = relative_error(an.grad.values(), fd);
      worst_lp = std::max(worst_lp, e);
      bad_lp += e >= 1e-4;
    }
    {
      losses::DpoBatch batch{{}, 0.1 + 0.9 * inst.rng.next_double()};
      const auto n = 1 + inst.rng.next_below(3);
      for (std::size_t k = 0; k < n; ++k) batch.items.push_back(random_pair(inst.rng, v));
      const auto an = losses::dpo_loss_and_grad(m, inst.adapters, inst.reference, batch);
      const auto fd = finite_difference(
          [&](const ParamVector& a) { return losses::dpo_loss(m, a, inst.reference, batch); },
          inst.adapters);
      const double e = relative_error(an.grad.values(), fd);
      worst_dpo = std::max(worst_dpo, e);
      bad_dpo += e >= 1e-4;
    }
    {
      losses::KtoBatch batch{{}, 0.1 + 0.9 * inst.rng.next_double(),
                             0.5 + inst.rng.next_double(), 0.5 + inst.rng.next_double()};
      const auto n = 1 + inst.rng.next_below(4);
      for (std::size_t k = 0; k < n; ++k) batch.items.push_back(random_feedback(inst.rng, v));
      const auto an = losses::kto_loss_and_grad(m, inst.adapters, inst.reference, batch);
      // The reference point is detached: hold it at its value for the
      // unperturbed adapters.
      const double z0 = losses::kto_reference_point(m, inst.adapters, inst.reference, batch);
      const auto fd = finite_difference(
          [&](const ParamVector& a) {
            return losses::kto_loss_at(m, a, inst.reference, batch, z0);
          },
          inst.adapters);
      const double e = relative_error(an.grad.values(), fd);
      worst_kto = std::max(worst_kto, e);
      bad_kto += e >= 1e-4;
    }
  }
  const double secs = seconds_since(t0);
  out.check(bad_lp == 0, std::to_string(kInstances) + " response_logprob instances, worst rel err " +
                             fmt(worst_lp));
  out.check(bad_dpo == 0, std::to_string(kInstances) + " DPO batches, worst rel err " + fmt(worst_dpo));
  out.check(bad_kto == 0, std::to_string(kInstances) + " KTO batches, worst rel err " + fmt(worst_kto));
  out.check(secs < 60.0, "runtime " + fmt(secs) + " s (limit 60 s)");
  return out;
}

// --- 2: closed-form anchors ----------------------------------------------

Outcome criterion_anchors() {
  Outcome out;
  double worst_dpo = 0.0, worst_kto = 0.0, worst_z0 = 0.0;
  const double lambdas[] = {1.0, 0.5, 2.3};
  for (int i = 0; i < 20; ++i) {
    auto inst = random_instance(5000 + static_cast<std::uint64_t>(i));
    const int v = inst.model.dims().vocab_size;
    losses::DpoBatch dpo{{}, 0.1};
    for (int k = 0; k < 4; ++k) dpo.items.push_back(random_pair(inst.rng, v));
    const double dl = losses::dpo_loss(inst.model, inst.adapters, inst.adapters, dpo);
    worst_dpo = std::max(worst_dpo, std::abs(dl - std::log(2.0)));
    for (double lam : lambdas) {
      losses::KtoBatch kto{{}, 0.1, lam, lam};
      for (int k = 0; k < 5; ++k) kto.items.push_back(random_feedback(inst.rng, v));
      const double kl = losses::kto_loss(inst.model, inst.adapters, inst.adapters, kto);
      const double z0 = losses::kto_reference_point(inst.model, inst.adapters, inst.adapters, kto);
      worst_kto = std::max(worst_kto, std::abs(kl - 0.5 * lam));
      worst_z0 = std::max(worst_z0, std::abs(z0));
    }
  }
  out.check(worst_dpo < 1e-9, "DPO loss at adapters == reference: max |loss - ln 2| = " + fmt(worst_dpo));
  out.check(worst_z0 == 0.0, "KTO reference point at adapters == reference: max |z0| = " + fmt(worst_z0));
  out.check(worst_kto < 1e-9,
            "KTO loss at adapters == reference, lambda in {1, 0.5, 2.3}: max |loss - lambda/2| = " +
                fmt(worst_kto));
  return out;
}

// --- 3: aggregator oracles -------------------------------------------------

struct SmallSetup {
  data::FederatedPairDataset corpus;
  model::BaseModel model;
};

SmallSetup small_setup(std::uint64_t seed) {
  data::SyntheticCorpusSpec spec;
  spec.clients = 4;
  spec.min_pairs_per_client = 4;
  spec.max_pairs_per_client = 7;
  spec.seed = seed;
  auto corpus = data::make_marker_corpus(spec);
  model::PretrainConfig pre;
  pre.steps = 60;
  model::ModelDims dims;
  dims.embed_dim = 16;
  dims.hidden_dim = 32;
  auto m = model::build_base_model(corpus, dims, {4, 8.0}, pre, seed);
  return {std::move(corpus), std::move(m)};
}

fed::RunConfig small_config(fed::Method method, fed::AggregatorKind agg, int rounds) {
  fed::RunConfig cfg;
  cfg.method = method;
  cfg.aggregator = agg;
  cfg.rounds = rounds;
  cfg.local.steps = 3;
  cfg.local.lr = 5e-3;
  cfg.probe_size = 6;
  return cfg;
}

Outcome criterion_aggregators() {
  Outcome out;
  const auto s = small_setup(11);

  {  // FedProx(mu = 0) vs FedAvg
    auto a = small_config(fed::Method::kKto, fed::AggregatorKind::kFedAvg, 20);
    auto b = a;
    b.aggregator = fed::AggregatorKind::kFedProx;
    b.local.prox_mu = 0.0;
    const auto data = fed::prepare_training_data(a, s.corpus);
    std::vector<ParamVector> ga, gb;
    const auto ra = fed::run_rounds(a, data, s.model,
                                    [&](const fed::RoundView& v) { ga.push_back(v.server.global_adapters); });
    const auto rb = fed::run_rounds(b, data, s.model,
                                    [&](const fed::RoundView& v) { gb.push_back(v.server.global_adapters); });
    bool same = ga == gb && ra.metrics.size() == 20 && rb.metrics.size() == 20;
    for (std::size_t r = 0; same && r < ra.metrics.size(); ++r) {
      const auto& x = ra.metrics[r];
      const auto& y = rb.metrics[r];
      same = x.round == y.round && x.method == y.method &&
             x.mean_client_loss == y.mean_client_loss && x.update_norm == y.update_norm &&
             x.probe_loss == y.probe_loss;
    }
    out.check(same, "FedProx(mu=0) bit-identical to FedAvg over 20 rounds (metrics and globals)");
  }

  {  // cloned clients vs a single client
    auto cfg = small_config(fed::Method::kDpo, fed::AggregatorKind::kFedAvg, 10);
    cfg.shared_client_streams = true;
    const auto& first = s.corpus.clients.begin()->second;
    data::FederatedPairDataset one, cloned;
    one.clients["solo"] = first;
    for (const char* id : {"c0", "c1", "c2", "c3"}) {
      for (auto p : first) {
        p.client_id = id;
        cloned.clients[id].push_back(p);
      }
    }
    std::vector<ParamVector> g1, g4;
    fed::run_rounds(cfg, one, s.model,
                    [&](const fed::RoundView& v) { g1.push_back(v.server.global_adapters); });
    fed::run_rounds(cfg, cloned, s.model,
                    [&](const fed::RoundView& v) { g4.push_back(v.server.global_adapters); });
    double worst = g1.size() == g4.size() ? 0.0 : 1.0;
    for (std::size_t r = 0; r < std::min(g1.size(), g4.size()); ++r) {
      for (std::size_t i = 0; i < g1[r].size(); ++i) {
        worst = std::max(worst, std::abs(g1[r][i] - g4[r][i]));
      }
    }
    out.check(worst < 1e-12, "FedAvg over 4 cloned clients vs 1 client, 10 rounds: max |diff| = " +
                                 fmt(worst));
  }

  {  // FedAdam / FedYogi first step
    RngStream rng(77);
    bool all_equal = true;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 16;
      std::vector<fed::ClientUpdate> ups;
      for (int k = 0; k < 3; ++k) {
        std::vector<double> d(n);
        for (auto& x : d) x = rng.next_normal() * 0.1;
        ups.push_back({ParamVector("L", d), 1 + rng.next_below(5), std::nullopt, 0.0});
      }
      std::vector<double> w(n);
      for (auto& x : w) x = rng.next_normal();
      fed::ServerConfig sc;
      const auto adam = fed::aggregate(fed::init_server(ParamVector("L", w), fed::AggregatorKind::kFedAdam),
                                       ups, fed::AggregatorKind::kFedAdam, sc, 3);
      const auto yogi = fed::aggregate(fed::init_server(ParamVector("L", w), fed::AggregatorKind::kFedYogi),
                                       ups, fed::AggregatorKind::kFedYogi, sc, 3);
      all_equal = all_equal && adam.global_adapters == yogi.global_adapters &&
                  adam.aggregator_state == yogi.aggregator_state;
    }
    out.check(all_equal, "FedAdam and FedYogi first step from zero moments identical (50 trials)");
  }

  {  // FedAdagrad hand example
    fed::ServerConfig sc;
    sc.adaptive_lr = 1.0;
    sc.tau = 0.0;
    const auto next = fed::aggregate(fed::init_server(ParamVector("L", {0.0}), fed::AggregatorKind::kFedAdagrad),
                                     std::vector<fed::ClientUpdate>{{ParamVector("L", {1.0}), 1, std::nullopt, 0.0}},
                                     fed::AggregatorKind::kFedAdagrad, sc, 1);
    const auto& v = std::get<fed::AdagradState>(next.aggregator_state).v;
    out.check(next.global_adapters[0] == 1.0 && v[0] == 1.0,
              "FedAdagrad w=[0], delta=[1], eta=1, tau=0 gives v=[" + fmt(v[0]) + "], w=[" +
                  fmt(next.global_adapters[0]) + "]");
  }

  {  // SCAFFOLD control variates under full participation
    auto cfg = small_config(fed::Method::kKto, fed::AggregatorKind::kScaffold, 10);
    cfg.local.optimizer = fed::LocalOptimizer::kSgd;
    cfg.local.lr = 0.05;
    const auto data = fed::prepare_training_data(cfg, s.corpus);
    double worst = 0.0;
    int rounds = 0;
    fed::run_rounds(cfg, data, s.model, [&](const fed::RoundView& v) {
      ++rounds;
      const auto* c = v.server.control_variate();
      std::vector<double> mean(c->size(), 0.0);
      for (const auto& cl : v.clients) {
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (*cl.control_variate)[i];
      }
      for (std::size_t i = 0; i < mean.size(); ++i) {
        worst = std::max(worst, std::abs((*c)[i] - mean[i] / static_cast<double>(v.clients.size())));
      }
    });
    out.check(rounds == 10 && worst < 1e-9,
              "SCAFFOLD server c equals mean client c_i every round: max |diff| = " + fmt(worst));
  }
  return out;
}

// --- 4: data transforms ----------------------------------------------------

data::FederatedPairDataset random_pairs(RngStream& rng) {
  data::FederatedPairDataset d;
  const auto clients = rng.next_below(6);
  std::size_t index = 0;
  for (std::size_t c = 0; c < clients; ++c) {
    const std::string id = "k" + std::to_string(rng.next_below(100));
    const auto n = rng.next_below(6);
    for (std::size_t k = 0; k < n; ++k) {
      const auto pick = [&] { return "t" + std::to_string(rng.next_below(4)); };
      d.clients[id].push_back({"p" + std::to_string(rng.next_below(5)), pick(), pick(), id, index++});
    }
  }
  return d;
}

using Key = std::tuple<std::string, std::string, int, std::size_t>;

std::multiset<Key> multiset_of(const data::FederatedFeedbackDataset& d) {
  std::multiset<Key> out;
  for (const auto& [id, exs] : d.clients) {
    for (const auto& e : exs) {
      out.insert({e.prompt, e.response, static_cast<int>(e.label), e.source_index});
    }
  }
  return out;
}

std::vector<std::size_t> counts_of(const data::FederatedFeedbackDataset& d) {
  std::vector<std::size_t> out;
  for (const auto& [id, exs] : d.clients) out.push_back(exs.size());
  return out;
}

// Six examples, three per client.
data::FederatedFeedbackDataset redistribution_fixture() {
  data::FederatedFeedbackDataset d;
  d.clients["a"] = {{"q1", "r1", Label::kDesirable, "a", 0},
                    {"q1", "x1", Label::kUndesirable, "a", 1},
                    {"q2", "r2", Label::kDesirable, "a", 2}};
  d.clients["b"] = {{"q2", "x2", Label::kUndesirable, "b", 3},
                    {"q3", "r3", Label::kDesirable, "b", 4},
                    {"q3", "x3", Label::kUndesirable, "b", 5}};
  return d;
}

// Frozen from the first run of the seeded shuffle on the fixture above.
const char* const kGoldenRedistribution =
    "a:q1/r1/desirable,a:q1/x1/undesirable,a:q2/x2/undesirable|"
    "b:q2/r2/desirable,b:q3/r3/desirable,b:q3/x3/undesirable";

std::string describe(const data::FederatedFeedbackDataset& d) {
  std::string s;
  for (const auto& [id, exs] : d.clients) {
    if (!s.empty()) s += "|";
    for (std::size_t i = 0; i < exs.size(); ++i) {
      if (i) s += ",";
      s += id + ":" + exs[i].prompt + "/" + exs[i].response + "/" + std::string(to_string(exs[i].label));
    }
  }
  return s;
}

Outcome criterion_data() {
  Outcome out;
  RngStream rng = RngStream(4).derive("data-props", 0);
  bool split_ok = true, counts_ok = true, multiset_ok = true, det_ok = true, ids_ok = true;
  for (int t = 0; t < 1000; ++t) {
    const auto pairs = random_pairs(rng);
    const auto split = data::split_pairs(pairs);
    const auto st = data::dataset_stats(split);
    split_ok = split_ok && split.total() == 2 * pairs.total() && st.desirable == pairs.total() &&
               st.undesirable == pairs.total();
    for (const auto& [id, ps] : pairs.clients) {
      split_ok = split_ok && split.clients.count(id) && split.clients.at(id).size() == 2 * ps.size();
    }
    const std::uint64_t seed = t % 3 == 0 ? 2023 : rng.next_u64();
    const auto r1 = data::redistribute(split, seed);
    const auto r2 = data::redistribute(split, seed);
    det_ok = det_ok && r1 == r2;
    counts_ok = counts_ok && counts_of(r1) == counts_of(split);
    multiset_ok = multiset_ok && multiset_of(r1) == multiset_of(split);
    for (const auto& [id, exs] : r1.clients) {
      for (const auto& e : exs) ids_ok = ids_ok && e.client_id == id;
    }
  }
  out.check(split_ok, "split_pairs: 2N examples, N per label, per-client doubling (1000 datasets)");
  out.check(det_ok, "redistribute deterministic for a fixed seed (1000 datasets)");
  out.check(counts_ok, "redistribute preserves per-client counts (1000 datasets)");
  out.check(multiset_ok && ids_ok, "redistribute preserves the global multiset (1000 datasets)");

  const auto fixture = redistribution_fixture();
  const auto golden = describe(data::redistribute(fixture, 2023));
  out.check(golden == kGoldenRedistribution, "seed 2023 fixture matches frozen assignment: " + golden);
  return out;
}

// --- 5: DPO applicability guard -------------------------------------------

template <typename Fn>
std::string error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const DpoRequiresPairs&) {
    return "DpoRequiresPairs";
  } catch (const InvalidConfig&) {
    return "InvalidConfig";
  } catch (const Error& e) {
    return std::string("Error: ") + e.what();
  }
  return "none";
}

Outcome criterion_applicability() {
  Outcome out;
  const auto s = small_setup(21);
  for (auto agg : fed::kAllAggregators) {
    auto cfg = small_config(fed::Method::kDpo, agg, 2);
    cfg.data_mode = fed::DataMode::kRedistributed;
    const auto k1 = error_kind([&] { fed::validate(cfg); });
    const auto k2 = error_kind([&] { fed::prepare_training_data(cfg, s.corpus); });
    if (k1 != "DpoRequiresPairs" || k2 != "DpoRequiresPairs") {
      out.check(false, "DPO + redistributed with " + std::string(fed::to_string(agg)) + ": " + k1 + ", " + k2);
    }
  }
  out.check(true, "validate and prepare_training_data reject DPO + redistributed for all 7 aggregators");

  auto dpo = small_config(fed::Method::kDpo, fed::AggregatorKind::kFedAvg, 2);
  const auto feedback = data::redistribute(data::split_pairs(s.corpus), 2023);
  out.check(error_kind([&] { fed::run_rounds(dpo, feedback, s.model); }) == "DpoRequiresPairs",
            "run_rounds rejects DPO on redistributed feedback data with DpoRequiresPairs");
  const auto clients = fed::make_clients(s.model.vocab(), feedback, {});
  const auto g = s.model.zero_adapters();
  out.check(error_kind([&] {
              fed::local_train(s.model, clients.front(), g, g, nullptr, RngStream(1),
                               {fed::Method::kDpo, fed::AggregatorKind::kFedAvg, {}, {}});
            }) == "DpoRequiresPairs",
            "local_train rejects DPO on a feedback client with DpoRequiresPairs");

  bool kto_ok = true;
  for (auto agg : fed::kAllAggregators) {
    auto cfg = small_config(fed::Method::kKto, agg, 2);
    cfg.data_mode = fed::DataMode::kRedistributed;
    try {
      fed::validate(cfg);
      const auto r = fed::run_rounds(cfg, fed::prepare_training_data(cfg, s.corpus), s.model);
      kto_ok = kto_ok && r.metrics.size() == 2;
    } catch (const std::exception& e) {
      kto_ok = false;
      out.notes.push_back("      KTO + redistributed with " + std::string(fed::to_string(agg)) + ": " + e.what());
    }
  }
  out.check(kto_ok, "KTO + redistributed trains under all 7 aggregators");

  fpref::testing::TempDir tmp("accept5");
  data::write_pairs(s.corpus, tmp / "pairs.jsonl");
  std::ostringstream o, e;
  const int code = cli::run({"fpref", "train", "--data", (tmp / "pairs.jsonl").string(), "--method",
                             "dpo", "--data-mode", "redistributed", "--rounds", "1", "--out",
                             (tmp / "run").string()},
                            o, e);
  out.check(code == 2 && e.str().find("DPO requires") != std::string::npos,
            "CLI train --method dpo --data-mode redistributed exits 2 (got " + std::to_string(code) + ")");
  return out;
}

// --- 6: learning sanity ---------------------------------------------------

double mean_margin(const model::BaseModel& m, const ParamVector& adapters,
                   const data::FederatedPairDataset& corpus) {
  double sum = 0.0;
  std::size_t n = 0;
  const model::AdaptedModel policy(m, adapters);
  for (const auto& [id, pairs] : corpus.clients) {
    for (const auto& p : pairs) {
      const auto t = fed::tokenize(m.vocab(), p, {});
      sum += policy.response_logprob(t.prompt, t.chosen) - policy.response_logprob(t.prompt, t.rejected);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

Outcome criterion_learning() {
  Outcome out;
  for (auto method : {fed::Method::kDpo, fed::Method::kKto}) {
    int improved = 0;
    double worst_secs = 0.0;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto t0 = Clock::now();
      data::SyntheticCorpusSpec spec;
      spec.seed = seed;
      const auto corpus = data::make_marker_corpus(spec);
      fed::RunConfig cfg;
      cfg.method = method;
      cfg.aggregator = fed::AggregatorKind::kFedAvg;
      cfg.rounds = 30;
      cfg.root_seed = seed;
      const auto m = model::build_base_model(corpus, cfg.model.dims(), cfg.model.lora(), cfg.pretrain, seed);
      const auto r = fed::run_rounds(cfg, fed::prepare_training_data(cfg, corpus), m);
      const double before = mean_margin(m, r.reference, corpus);
      const double after = mean_margin(m, r.final_adapters, corpus);
      worst_secs = std::max(worst_secs, seconds_since(t0));
      improved += after > before;
      detail += " seed " + std::to_string(seed) + ": " + fmt(before) + " -> " + fmt(after) + ";";
    }
    out.check(improved == 3, std::string(fed::to_string(method)) + " + FedAvg, 30 rounds, margin rose for " +
                                 std::to_string(improved) + "/3 seeds;" + detail);
    out.check(worst_secs < 300.0, std::string(fed::to_string(method)) + " slowest run " + fmt(worst_secs) +
                                      " s (limit 300 s)");
  }
  return out;
}

// --- 7: matrix structure -----------------------------------------------------

Outcome criterion_matrix() {
  Outcome out;
  fpref::testing::TempDir tmp("accept7");
  std::ostringstream o, e;
  const int code = cli::run({"fpref", "matrix", "--rounds", "3", "--out", (tmp / "m").string()}, o, e);
  out.check(code == 0, "matrix exit code " + std::to_string(code));
  int run_dirs = 0;
  for (const auto& entry : fs::directory_iterator(tmp / "m")) {
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.jsonl") &&
        fs::exists(entry.path() / "adapters.ckpt")) {
      ++run_dirs;
    }
  }
  out.check(run_dirs == 21, "run directories: " + std::to_string(run_dirs));
  std::size_t judged = 0, safety = 0;
  if (fs::exists(tmp / "m" / "scores.jsonl")) {
    for (const auto& s : eval::load_scores((tmp / "m" / "scores.jsonl").string())) {
      if (s.method == eval::ScoreMethod::kBase) continue;
      if (s.benchmark == eval::Benchmark::kAdvBench) {
        ++safety;
      } else {
        ++judged;
      }
    }
  }
  out.check(judged == 42, "judged 0-10 results: " + std::to_string(judged));
  out.check(safety == 21, "AdvBench results: " + std::to_string(safety));
  std::size_t report_judged = 0;
  if (fs::exists(tmp / "m" / "report.json")) {
    const auto j = nlohmann::json::parse(fpref::testing::read_file(tmp / "m" / "report.json"));
    for (const auto& c : j["cells"]) {
      if (c["benchmark"] != "AdvBench") report_judged += c["scores"].size();
    }
  }
  out.check(report_judged == 42, "report.json judged scores: " + std::to_string(report_judged));

  // Published FedAvg and FedYogi rows.
  using B = eval::Benchmark;
  using M = eval::ScoreMethod;
  struct Row {
    const char* agg;
    B bench;
    double dpo, ktoo, ktor;
    M arrow;
  };
  const Row rows[] = {
      {"FedAvg", B::kMtBench1, 7.84, 8.14, 8.11, M::kKtoo},
      {"FedAvg", B::kVicuna, 8.03, 8.51, 8.40, M::kKtoo},
      {"FedAvg", B::kAdvBench, 12.50, 15.77, 12.69, M::kKtoo},
      {"FedYogi", B::kMtBench1, 8.75, 8.98, 9.03, M::kKtor},
      {"FedYogi", B::kVicuna, 7.65, 8.21, 8.13, M::kKtoo},
      {"FedYogi", B::kAdvBench, 11.35, 12.88, 17.12, M::kKtor},
  };
  std::vector<eval::BenchmarkScore> scores;
  for (const auto& r : rows) {
    const auto sc = eval::scale_for(r.bench);
    scores.push_back({r.bench, M::kDpo, std::string(r.agg), r.dpo, sc});
    scores.push_back({r.bench, M::kKtoo, std::string(r.agg), r.ktoo, sc});
    scores.push_back({r.bench, M::kKtor, std::string(r.agg), r.ktor, sc});
  }
  const auto report = eval::build_report(scores);
  bool marks = report.cells.size() == 6;
  for (const auto& c : report.cells) {
    for (const auto& r : rows) {
      if (c.aggregator == r.agg && c.benchmark == r.bench) {
        marks = marks && c.best == std::vector<M>{r.arrow};
      }
    }
  }
  out.check(marks, "best-method marks match the published FedAvg and FedYogi rows (6 cells)");
  return out;
}

// --- 8: end-to-end determinism ------------------------------------------

Outcome criterion_determinism() {
  Outcome out;
  fpref::testing::TempDir tmp("accept8");
  data::SyntheticCorpusSpec spec;
  spec.seed = 5;
  data::write_pairs(data::make_marker_corpus(spec), tmp / "pairs.jsonl");
  const std::vector<std::vector<std::string>> configs = {
      {"--method", "kto", "--data-mode", "redistributed", "--agg", "fedadam", "--fraction", "0.5"},
      {"--method", "dpo", "--agg", "scaffold", "--fraction", "0.75"},
  };
  const char* files[] = {"metrics.jsonl", "adapters.ckpt", "reference.ckpt", "base.ckpt"};
  int cfg_index = 0;
  for (const auto& extra : configs) {
    std::vector<std::string> outputs;
    bool ok = true;
    int run = 0;
    for (const char* workers : {"1", "1", "4"}) {
      const auto dir = tmp / ("c" + std::to_string(cfg_index) + "-" + std::to_string(run++));
      std::vector<std::string> args = {"fpref", "train", "--data", (tmp / "pairs.jsonl").string(),
                                       "--rounds", "6", "--seed", "99", "--workers", workers,
                                       "--out", dir.string()};
      args.insert(args.end(), extra.begin(), extra.end());
      std::ostringstream o, e;
      ok = ok && cli::run(args, o, e) == 0;
      std::string blob;
      for (const char* f : files) blob += fpref::testing::read_file(dir / f) + '\x1e';
      outputs.push_back(blob);
    }
    ok = ok && outputs[0] == outputs[1] && outputs[0] == outputs[2] && outputs[0].size() > 100;
    std::string desc;
    for (const auto& a : extra) desc += " " + a;
    out.check(ok, "train" + desc + ": metrics and checkpoints byte-identical across 2 runs with "
                  "workers=1 and 1 run with workers=4");
    ++cfg_index;
  }
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness vs central differences", criterion_gradients},
      {2, "closed-form loss anchors", criterion_anchors},
      {3, "aggregator oracles", criterion_aggregators},
      {4, "data-transform contracts", criterion_data},
      {5, "DPO applicability guard", criterion_applicability},
      {6, "learning sanity on the marker corpus", criterion_learning},
      {7, "experiment matrix structure", criterion_matrix},
      {8, "end-to-end determinism", criterion_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.check(false, std::string("unexpected exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " ("
              << fmt(seconds_since(t0)) << " s)\n";
    for (const auto& n : o.notes) std::cout << "      " << n << '\n';
    std::cout.flush();
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed")
            << '\n';
  return failed == 0 ? 0 : 1;
}
