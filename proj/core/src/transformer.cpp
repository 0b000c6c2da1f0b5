#include "fpref/model/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fpref/core/error.hpp"

namespace fpref::model {
namespace {

constexpr double kRmsEps = 1e-5;

struct LayerOffsets {
  std::size_t q, k, v, o, mlp_in, mlp_out;
};

struct Layout {
  std::size_t tok_emb = 0;
  std::size_t pos_emb = 0;
  std::vector<LayerOffsets> layers;
  std::size_t head = 0;
  std::size_t total = 0;
};

Layout make_layout(const ModelDims& d) {
  const auto V = static_cast<std::size_t>(d.vocab_size);
  const auto T = static_cast<std::size_t>(d.context_len);
  const auto E = static_cast<std::size_t>(d.embed_dim);
  const auto H = static_cast<std::size_t>(d.hidden_dim);
  Layout l;
  std::size_t at = 0;
  l.tok_emb = at;
  at += V * E;
  l.pos_emb = at;
  at += T * E;
  for (int i = 0; i < d.n_layers; ++i) {
    LayerOffsets o{};
    o.q = at;
    at += E * E;
    o.k = at;
    at += E * E;
    o.v = at;
    at += E * E;
    o.o = at;
    at += E * E;
    o.mlp_in = at;
    at += H * E;
    o.mlp_out = at;
    at += E * H;
    l.layers.push_back(o);
  }
  l.head = at;
  at += V * E;
  l.total = at;
  return l;
}

void validate_dims(const ModelDims& d) {
  if (d.vocab_size < 4 || d.context_len < 2 || d.embed_dim < 1 ||
      d.hidden_dim < 1 || d.n_layers < 0) {
    throw InvalidArgument("invalid model dims");
  }
}

// y = W x, W is rows x cols.
void matvec(const double* W, int rows, int cols, const double* x, double* y) {
  for (int r = 0; r < rows; ++r) {
    const double* w = W + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += w[c] * x[c];
    y[r] = acc;
  }
}

// dx += W^T dy
void matvec_t_acc(const double* W, int rows, int cols, const double* dy,
                  double* dx) {
  for (int r = 0; r < rows; ++r) {
    const double* w = W + static_cast<std::size_t>(r) * cols;
    const double g = dy[r];
    for (int c = 0; c < cols; ++c) dx[c] += w[c] * g;
  }
}

// G += dy x^T
void outer_acc(double* G, int rows, int cols, const double* dy, const double* x) {
  for (int r = 0; r < rows; ++r) {
    double* g = G + static_cast<std::size_t>(r) * cols;
    const double s = dy[r];
    for (int c = 0; c < cols; ++c) g[c] += s * x[c];
  }
}

// y = x / rms(x); returns rms.
double rms_norm(const double* x, int n, double* y) {
  double ss = 0.0;
  for (int i = 0; i < n; ++i) ss += x[i] * x[i];
  const double rms = std::sqrt(ss / n + kRmsEps);
  for (int i = 0; i < n; ++i) y[i] = x[i] / rms;
  return rms;
}

// dx += (dy - y * <dy, y> / n) / rms
void rms_norm_back(const double* y, double rms, int n, const double* dy,
                   double* dx) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += dy[i] * y[i];
  const double m = dot / n;
  for (int i = 0; i < n; ++i) dx[i] += (dy[i] - y[i] * m) / rms;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Activations of one forward pass over a sequence of n positions.
struct LayerCache {
  std::vector<double> x_in, a, ra, q, k, v, p, o, x_mid, b, rb, u, g;
};

struct ForwardCache {
  int n = 0;
  std::vector<LayerCache> layers;
  std::vector<double> x_out, f, rf, logits;
};

class Network {
 public:
  Network(const ModelDims& dims, const Layout& layout, const double* w)
      : d_(dims), l_(layout), w_(w) {}

  void forward(std::span<const TokenId> input, ForwardCache& c) const {
    const int n = static_cast<int>(input.size());
    const int E = d_.embed_dim, H = d_.hidden_dim, V = d_.vocab_size;
    c.n = n;
    std::vector<double> x(static_cast<std::size_t>(n) * E);
    for (int t = 0; t < n; ++t) {
      const double* te = w_ + l_.tok_emb + static_cast<std::size_t>(input[t]) * E;
      const double* pe = w_ + l_.pos_emb + static_cast<std::size_t>(t) * E;
      for (int i = 0; i < E; ++i) x[t * E + i] = te[i] + pe[i];
    }
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(E));
    c.layers.resize(l_.layers.size());
    for (std::size_t li = 0; li < l_.layers.size(); ++li) {
      const auto& off = l_.layers[li];
      auto& L = c.layers[li];
      L.x_in = x;
      L.a.assign(n * E, 0.0);
      L.ra.assign(n, 0.0);
      L.q.assign(n * E, 0.0);
      L.k.assign(n * E, 0.0);
      L.v.assign(n * E, 0.0);
      L.p.assign(static_cast<std::size_t>(n) * n, 0.0);
      L.o.assign(n * E, 0.0);
      for (int t = 0; t < n; ++t) {
        L.ra[t] = rms_norm(&x[t * E], E, &L.a[t * E]);
        matvec(w_ + off.q, E, E, &L.a[t * E], &L.q[t * E]);
        matvec(w_ + off.k, E, E, &L.a[t * E], &L.k[t * E]);
        matvec(w_ + off.v, E, E, &L.a[t * E], &L.v[t * E]);
      }
      std::vector<double> proj(E);
      for (int t = 0; t < n; ++t) {
        double* p = &L.p[static_cast<std::size_t>(t) * n];
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= t; ++j) {
          double s = 0.0;
          for (int i = 0; i < E; ++i) s += L.q[t * E + i] * L.k[j * E + i];
          p[j] = s * att_scale;
          mx = std::max(mx, p[j]);
        }
        double z = 0.0;
        for (int j = 0; j <= t; ++j) {
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        for (int j = 0; j <= t; ++j) p[j] /= z;
        for (int j = 0; j <= t; ++j) {
          for (int i = 0; i < E; ++i) L.o[t * E + i] += p[j] * L.v[j * E + i];
        }
        matvec(w_ + off.o, E, E, &L.o[t * E], proj.data());
        for (int i = 0; i < E; ++i) x[t * E + i] += proj[i];
      }
      L.x_mid = x;
      L.b.assign(n * E, 0.0);
      L.rb.assign(n, 0.0);
      L.u.assign(static_cast<std::size_t>(n) * H, 0.0);
      L.g.assign(static_cast<std::size_t>(n) * H, 0.0);
      for (int t = 0; t < n; ++t) {
        L.rb[t] = rms_norm(&x[t * E], E, &L.b[t * E]);
        matvec(w_ + off.mlp_in, H, E, &L.b[t * E], &L.u[t * H]);
        for (int i = 0; i < H; ++i) {
          const double u = L.u[t * H + i];
          L.g[t * H + i] = u * sigmoid(u);
        }
        matvec(w_ + off.mlp_out, E, H, &L.g[t * H], proj.data());
        for (int i = 0; i < E; ++i) x[t * E + i] += proj[i];
      }
    }
    c.x_out = x;
    c.f.assign(n * E, 0.0);
    c.rf.assign(n, 0.0);
    c.logits.assign(static_cast<std::size_t>(n) * V, 0.0);
    for (int t = 0; t < n; ++t) {
      c.rf[t] = rms_norm(&x[t * E], E, &c.f[t * E]);
      matvec(w_ + l_.head, V, E, &c.f[t * E], &c.logits[static_cast<std::size_t>(t) * V]);
    }
  }

  // Accumulates d(objective)/d(weights) into grad (base layout) given
  // d(objective)/d(logits).
  void backward(std::span<const TokenId> input, const ForwardCache& c,
                const std::vector<double>& dlogits, double* grad) const {
    const int n = c.n;
    const int E = d_.embed_dim, H = d_.hidden_dim, V = d_.vocab_size;
    std::vector<double> dx(static_cast<std::size_t>(n) * E, 0.0);
    {
      std::vector<double> df(E);
      for (int t = 0; t < n; ++t) {
        const double* dl = &dlogits[static_cast<std::size_t>(t) * V];
        outer_acc(grad + l_.head, V, E, dl, &c.f[t * E]);
        std::fill(df.begin(), df.end(), 0.0);
        matvec_t_acc(w_ + l_.head, V, E, dl, df.data());
        rms_norm_back(&c.f[t * E], c.rf[t], E, df.data(), &dx[t * E]);
      }
    }
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(E));
    for (std::size_t li = l_.layers.size(); li-- > 0;) {
      const auto& off = l_.layers[li];
      const auto& L = c.layers[li];
      // MLP block: x_out = x_mid + W2 silu(W1 rms(x_mid))
      std::vector<double> dmid = dx;
      {
        std::vector<double> dg(H), du(H), db(E);
        for (int t = 0; t < n; ++t) {
          const double* dy = &dx[t * E];
          outer_acc(grad + off.mlp_out, E, H, dy, &L.g[t * H]);
          std::fill(dg.begin(), dg.end(), 0.0);
          matvec_t_acc(w_ + off.mlp_out, E, H, dy, dg.data());
          for (int i = 0; i < H; ++i) {
            const double u = L.u[t * H + i];
            const double s = sigmoid(u);
            du[i] = dg[i] * s * (1.0 + u * (1.0 - s));
          }
          outer_acc(grad + off.mlp_in, H, E, du.data(), &L.b[t * E]);
          std::fill(db.begin(), db.end(), 0.0);
          matvec_t_acc(w_ + off.mlp_in, H, E, du.data(), db.data());
          rms_norm_back(&L.b[t * E], L.rb[t], E, db.data(), &dmid[t * E]);
        }
      }
      // Attention block: x_mid = x_in + Wo attn(rms(x_in))
      std::vector<double> din = dmid;
      std::vector<double> dq(static_cast<std::size_t>(n) * E, 0.0);
      std::vector<double> dk(static_cast<std::size_t>(n) * E, 0.0);
      std::vector<double> dv(static_cast<std::size_t>(n) * E, 0.0);
      {
        std::vector<double> dout(E), dp(n);
        for (int t = 0; t < n; ++t) {
          const double* dy = &dmid[t * E];
          outer_acc(grad + off.o, E, E, dy, &L.o[t * E]);
          std::fill(dout.begin(), dout.end(), 0.0);
          matvec_t_acc(w_ + off.o, E, E, dy, dout.data());
          const double* p = &L.p[static_cast<std::size_t>(t) * n];
          double pdp = 0.0;
          for (int j = 0; j <= t; ++j) {
            double s = 0.0;
            for (int i = 0; i < E; ++i) s += dout[i] * L.v[j * E + i];
            dp[j] = s;
            pdp += p[j] * s;
            for (int i = 0; i < E; ++i) dv[j * E + i] += p[j] * dout[i];
          }
          for (int j = 0; j <= t; ++j) {
            const double ds = p[j] * (dp[j] - pdp) * att_scale;
            for (int i = 0; i < E; ++i) {
              dq[t * E + i] += ds * L.k[j * E + i];
              dk[j * E + i] += ds * L.q[t * E + i];
            }
          }
        }
        std::vector<double> da(E);
        for (int t = 0; t < n; ++t) {
          outer_acc(grad + off.q, E, E, &dq[t * E], &L.a[t * E]);
          outer_acc(grad + off.k, E, E, &dk[t * E], &L.a[t * E]);
          outer_acc(grad + off.v, E, E, &dv[t * E], &L.a[t * E]);
          std::fill(da.begin(), da.end(), 0.0);
          matvec_t_acc(w_ + off.q, E, E, &dq[t * E], da.data());
          matvec_t_acc(w_ + off.k, E, E, &dk[t * E], da.data());
          matvec_t_acc(w_ + off.v, E, E, &dv[t * E], da.data());
          rms_norm_back(&L.a[t * E], L.ra[t], E, da.data(), &din[t * E]);
        }
      }
      dx = std::move(din);
    }
    for (int t = 0; t < n; ++t) {
      double* te = grad + l_.tok_emb + static_cast<std::size_t>(input[t]) * E;
      double* pe = grad + l_.pos_emb + static_cast<std::size_t>(t) * E;
      for (int i = 0; i < E; ++i) {
        te[i] += dx[t * E + i];
        pe[i] += dx[t * E + i];
      }
    }
  }

 private:
  const ModelDims& d_;
  const Layout& l_;
  const double* w_;
};

// Log-softmax value at `target` for one row of logits; fills probs.
double log_softmax_at(const double* logits, int V, TokenId target,
                      std::vector<double>* probs) {
  double mx = logits[0];
  for (int i = 1; i < V; ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (int i = 0; i < V; ++i) z += std::exp(logits[i] - mx);
  const double lse = mx + std::log(z);
  if (probs) {
    probs->resize(V);
    for (int i = 0; i < V; ++i) (*probs)[i] = std::exp(logits[i] - lse);
  }
  return logits[target] - lse;
}

struct PreparedSequence {
  std::vector<TokenId> input;   // [<bos>] + prompt + response[:-1]
  std::size_t first_scored = 0; // input position predicting response[0]
};

PreparedSequence prepare(const ModelDims& dims, std::span<const TokenId> prompt,
                         std::span<const TokenId> response) {
  if (response.empty()) throw InvalidArgument("response must be nonempty");
  const std::size_t needed = prompt.size() + response.size();
  if (needed > static_cast<std::size_t>(dims.context_len)) {
    throw ContextOverflow(needed, static_cast<std::size_t>(dims.context_len));
  }
  auto check = [&](TokenId id) {
    if (id < 0 || id >= dims.vocab_size) {
      throw OutOfVocabToken("id " + std::to_string(id));
    }
  };
  PreparedSequence s;
  s.input.reserve(needed);
  s.input.push_back(Vocab::kBos);
  for (TokenId id : prompt) {
    check(id);
    s.input.push_back(id);
  }
  for (TokenId id : response) check(id);
  for (std::size_t i = 0; i + 1 < response.size(); ++i) s.input.push_back(response[i]);
  s.first_scored = prompt.size();
  return s;
}

const Layout& layout_for(const ModelDims& dims) {
  // Layouts are tiny; recompute per thread-local dims to stay lock-free.
  thread_local ModelDims cached_dims{};
  thread_local Layout cached;
  thread_local bool valid = false;
  if (!valid || !(cached_dims == dims)) {
    cached = make_layout(dims);
    cached_dims = dims;
    valid = true;
  }
  return cached;
}

}  // namespace

// ---------------------------------------------------------------- BaseModel

BaseModel::BaseModel(Vocab vocab, ModelDims dims, LoraConfig lora,
                     ParamVector weights)
    : vocab_(std::move(vocab)), dims_(dims), lora_(lora), weights_(std::move(weights)) {
  validate_dims(dims_);
  if (static_cast<std::size_t>(dims_.vocab_size) != vocab_.size()) {
    throw InvalidArgument("model vocab_size does not match vocab");
  }
  const std::string expected = base_layout_id(dims_);
  if (weights_.layout_id() != expected || weights_.size() != base_size(dims_)) {
    throw LayoutMismatch(expected, weights_.layout_id());
  }
  require_finite(weights_, "base model weights");
  if (lora_.rank < 1 || !(lora_.alpha > 0.0)) {
    throw InvalidArgument("LoRA rank must be >= 1 and alpha > 0");
  }
  index_layout();
}

void BaseModel::index_layout() {
  const Layout l = make_layout(dims_);
  const int E = dims_.embed_dim, H = dims_.hidden_dim, V = dims_.vocab_size;
  slots_.clear();
  for (std::size_t i = 0; i < l.layers.size(); ++i) {
    const auto& o = l.layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    slots_.push_back({p + "q", o.q, E, E, 0});
    slots_.push_back({p + "k", o.k, E, E, 0});
    slots_.push_back({p + "v", o.v, E, E, 0});
    slots_.push_back({p + "o", o.o, E, E, 0});
    slots_.push_back({p + "mlp_in", o.mlp_in, H, E, 0});
    slots_.push_back({p + "mlp_out", o.mlp_out, E, H, 0});
  }
  slots_.push_back({"head", l.head, V, E, 0});
  std::size_t at = 0;
  for (auto& s : slots_) {
    if (lora_.rank > std::min(s.rows, s.cols)) {
      throw InvalidArgument("LoRA rank " + std::to_string(lora_.rank) +
                            " exceeds min dimension of " + s.name);
    }
    s.adapter_offset = at;
    at += static_cast<std::size_t>(lora_.rank) * (s.rows + s.cols);
  }
  adapter_size_ = at;
  std::ostringstream id;
  id << "lora/" << base_layout_id(dims_).substr(5) << "-r" << lora_.rank;
  adapter_layout_ = id.str();
}

BaseModel BaseModel::random(Vocab vocab, ModelDims dims, LoraConfig lora,
                            RngStream& rng, double init_std) {
  dims.vocab_size = static_cast<int>(vocab.size());
  validate_dims(dims);
  std::vector<double> w(base_size(dims));
  for (auto& x : w) x = init_std * rng.next_normal();
  ParamVector weights(base_layout_id(dims), std::move(w));
  return BaseModel(std::move(vocab), dims, lora, std::move(weights));
}

std::string BaseModel::base_layout_id(const ModelDims& d) {
  std::ostringstream id;
  id << "base/v" << d.vocab_size << "-t" << d.context_len << "-d" << d.embed_dim
     << "-h" << d.hidden_dim << "-l" << d.n_layers;
  return id.str();
}

std::size_t BaseModel::base_size(const ModelDims& dims) {
  return make_layout(dims).total;
}

BaseModel BaseModel::with_lora(LoraConfig lora) const {
  return BaseModel(vocab_, dims_, lora, weights_);
}

BaseModel BaseModel::with_weights(ParamVector weights) const {
  return BaseModel(vocab_, dims_, lora_, std::move(weights));
}

ParamVector BaseModel::zero_adapters() const {
  return ParamVector::zeros(adapter_layout_, adapter_size_);
}

ParamVector BaseModel::init_adapters(RngStream& rng) const {
  std::vector<double> a(adapter_size_, 0.0);
  for (const auto& s : slots_) {
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(s.cols));
    const std::size_t n = static_cast<std::size_t>(lora_.rank) * s.cols;
    for (std::size_t i = 0; i < n; ++i) {
      a[s.adapter_offset + i] = std_dev * rng.next_normal();
    }
  }
  return ParamVector(adapter_layout_, std::move(a));
}

// ------------------------------------------------------------- AdaptedModel

AdaptedModel::AdaptedModel(const BaseModel& base)
    : base_(&base),
      effective_(base.weights().values().begin(), base.weights().values().end()) {}

AdaptedModel::AdaptedModel(const BaseModel& base, const ParamVector& adapters)
    : base_(&base), adapters_(adapters) {
  if (adapters.layout_id() != base.adapter_layout_id() ||
      adapters.size() != base.adapter_size()) {
    throw LayoutMismatch(base.adapter_layout_id(), adapters.layout_id());
  }
  auto w = base.weights().values();
  effective_.assign(w.begin(), w.end());
  const int r = base.lora().rank;
  const double s = base.lora().scale();
  auto ad = adapters.values();
  std::vector<double> ba;
  for (const auto& slot : base.adapted_matrices()) {
    const double* A = ad.data() + slot.adapter_offset;
    const double* B = A + static_cast<std::size_t>(r) * slot.cols;
    ba.assign(static_cast<std::size_t>(slot.rows) * slot.cols, 0.0);
    for (int i = 0; i < slot.rows; ++i) {
      for (int k = 0; k < r; ++k) {
        const double b = B[i * r + k];
        const double* a = A + static_cast<std::size_t>(k) * slot.cols;
        double* row = &ba[static_cast<std::size_t>(i) * slot.cols];
        for (int j = 0; j < slot.cols; ++j) row[j] += b * a[j];
      }
    }
    double* W = effective_.data() + slot.offset;
    for (std::size_t i = 0; i < ba.size(); ++i) W[i] += s * ba[i];
  }
}

double AdaptedModel::response_logprob(std::span<const TokenId> prompt,
                                      std::span<const TokenId> response) const {
  const auto& dims = base_->dims();
  auto seq = prepare(dims, prompt, response);
  const auto& layout = layout_for(dims);
  Network net(dims, layout, effective_.data());
  ForwardCache cache;
  net.forward(seq.input, cache);
  double total = 0.0;
  const int V = dims.vocab_size;
  for (std::size_t i = 0; i < response.size(); ++i) {
    const std::size_t pos = seq.first_scored + i;
    total += log_softmax_at(&cache.logits[pos * V], V, response[i], nullptr);
  }
  return total;
}

LogProbGrad AdaptedModel::logprob_grad(std::span<const TokenId> prompt,
                                       std::span<const TokenId> response) const {
  if (!adapters_) throw InvalidArgument("logprob_grad needs an adapter vector");
  const auto& dims = base_->dims();
  auto seq = prepare(dims, prompt, response);
  const auto& layout = layout_for(dims);
  Network net(dims, layout, effective_.data());
  ForwardCache cache;
  net.forward(seq.input, cache);

  const int V = dims.vocab_size;
  std::vector<double> dlogits(cache.logits.size(), 0.0);
  std::vector<double> probs;
  double total = 0.0;
  for (std::size_t i = 0; i < response.size(); ++i) {
    const std::size_t pos = seq.first_scored + i;
    total += log_softmax_at(&cache.logits[pos * V], V, response[i], &probs);
    double* d = &dlogits[pos * V];
    for (int v = 0; v < V; ++v) d[v] = -probs[v];
    d[response[i]] += 1.0;
  }

  std::vector<double> full(layout.total, 0.0);
  net.backward(seq.input, cache, dlogits, full.data());

  // Chain rule through W' = W + s B A:
  //   dA = s B^T dW',  dB = s dW' A^T.
  const int r = base_->lora().rank;
  const double s = base_->lora().scale();
  auto ad = adapters_->values();
  std::vector<double> g(base_->adapter_size(), 0.0);
  for (const auto& slot : base_->adapted_matrices()) {
    const double* A = ad.data() + slot.adapter_offset;
    const double* B = A + static_cast<std::size_t>(r) * slot.cols;
    double* gA = g.data() + slot.adapter_offset;
    double* gB = gA + static_cast<std::size_t>(r) * slot.cols;
    const double* G = full.data() + slot.offset;
    for (int i = 0; i < slot.rows; ++i) {
      const double* grow = G + static_cast<std::size_t>(i) * slot.cols;
      for (int k = 0; k < r; ++k) {
        const double b = B[i * r + k];
        const double* a = A + static_cast<std::size_t>(k) * slot.cols;
        double* ga = gA + static_cast<std::size_t>(k) * slot.cols;
        double acc = 0.0;
        for (int j = 0; j < slot.cols; ++j) {
          ga[j] += s * b * grow[j];
          acc += grow[j] * a[j];
        }
        gB[i * r + k] = s * acc;
      }
    }
  }
  ParamVector grad(base_->adapter_layout_id(), std::move(g));
  require_finite(grad, "logprob_grad");
  return {total, std::move(grad)};
}

std::vector<double> AdaptedModel::next_token_logits(
    std::span<const TokenId> context) const {
  const auto& dims = base_->dims();
  if (context.size() + 1 > static_cast<std::size_t>(dims.context_len)) {
    throw ContextOverflow(context.size() + 1,
                          static_cast<std::size_t>(dims.context_len));
  }
  std::vector<TokenId> input;
  input.reserve(context.size() + 1);
  input.push_back(Vocab::kBos);
  for (TokenId id : context) {
    if (id < 0 || id >= dims.vocab_size) throw OutOfVocabToken("id " + std::to_string(id));
    input.push_back(id);
  }
  const auto& layout = layout_for(dims);
  Network net(dims, layout, effective_.data());
  ForwardCache cache;
  net.forward(input, cache);
  const int V = dims.vocab_size;
  const std::size_t last = input.size() - 1;
  return {cache.logits.begin() + static_cast<std::ptrdiff_t>(last * V),
          cache.logits.begin() + static_cast<std::ptrdiff_t>((last + 1) * V)};
}

// ----------------------------------------------------------- free functions

double response_logprob(const BaseModel& model, const ParamVector& adapters,
                        std::span<const TokenId> prompt,
                        std::span<const TokenId> response) {
  return AdaptedModel(model, adapters).response_logprob(prompt, response);
}

LogProbGrad logprob_grad(const BaseModel& model, const ParamVector& adapters,
                         std::span<const TokenId> prompt,
                         std::span<const TokenId> response) {
  return AdaptedModel(model, adapters).logprob_grad(prompt, response);
}

double base_response_logprob(const BaseModel& model,
                             std::span<const TokenId> prompt,
                             std::span<const TokenId> response) {
  return AdaptedModel(model).response_logprob(prompt, response);
}

std::vector<TokenId> sample_response(const BaseModel& model,
                                     const ParamVector& adapters,
                                     std::span<const TokenId> prompt,
                                     const SamplingConfig& cfg, RngStream& rng) {
  const auto context_len = static_cast<std::size_t>(model.dims().context_len);
  if (prompt.size() + 1 > context_len) {
    throw ContextOverflow(prompt.size() + 1, context_len);
  }
  AdaptedModel policy(model, adapters);
  std::vector<TokenId> context(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  while (out.size() < cfg.max_len && context.size() + 1 <= context_len) {
    auto logits = policy.next_token_logits(context);
    TokenId next = 0;
    if (cfg.temperature <= 0.0) {
      next = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
    } else {
      double mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (auto& l : logits) {
        l = std::exp((l - mx) / cfg.temperature);
        z += l;
      }
      const double u = rng.next_double() * z;
      double acc = 0.0;
      next = static_cast<TokenId>(logits.size() - 1);
      for (std::size_t i = 0; i < logits.size(); ++i) {
        acc += logits[i];
        if (u < acc) {
          next = static_cast<TokenId>(i);
          break;
        }
      }
    }
    if (next == Vocab::kEos) break;
    out.push_back(next);
    context.push_back(next);
  }
  return out;
}

SequenceGrad sequence_logprob_base_grad(const BaseModel& model,
                                        std::span<const TokenId> tokens) {
  const auto& dims = model.dims();
  if (tokens.size() < 2) throw InvalidArgument("sequence needs at least 2 tokens");
  const std::size_t n = tokens.size() - 1;
  if (n > static_cast<std::size_t>(dims.context_len)) {
    throw ContextOverflow(n, static_cast<std::size_t>(dims.context_len));
  }
  for (TokenId id : tokens) {
    if (id < 0 || id >= dims.vocab_size) throw OutOfVocabToken("id " + std::to_string(id));
  }
  const auto& layout = layout_for(dims);
  Network net(dims, layout, model.weights().values().data());
  ForwardCache cache;
  auto input = tokens.first(n);
  net.forward(input, cache);
  const int V = dims.vocab_size;
  std::vector<double> dlogits(cache.logits.size(), 0.0);
  std::vector<double> probs;
  double total = 0.0;
  for (std::size_t pos = 0; pos < n; ++pos) {
    const TokenId target = tokens[pos + 1];
    total += log_softmax_at(&cache.logits[pos * V], V, target, &probs);
    double* d = &dlogits[pos * V];
    for (int v = 0; v < V; ++v) d[v] = -probs[v];
    d[target] += 1.0;
  }
  std::vector<double> full(layout.total, 0.0);
  net.backward(input, cache, dlogits, full.data());
  return {total, n, ParamVector(model.weights().layout_id(), std::move(full))};
}

}  // namespace fpref::model
