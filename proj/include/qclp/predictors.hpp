#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "qclp/embedding.hpp"
#include "qclp/errors.hpp"
#include "qclp/metrics.hpp"
#include "qclp/rng.hpp"
#include "qclp/temporal_graph.hpp"

namespace qclp {

enum class Arch { mlp, gcn, sage, gae, ncn };

inline Arch parse_arch(const std::string& name) {
  if (name == "mlp") return Arch::mlp;
  if (name == "gcn") return Arch::gcn;
  if (name == "sage") return Arch::sage;
  if (name == "gae") return Arch::gae;
  if (name == "ncn") return Arch::ncn;
  throw ValidationError("unknown model architecture: " + name);
}

inline std::string arch_name(Arch arch) {
  switch (arch) {
    case Arch::mlp: return "mlp";
    case Arch::gcn: return "gcn";
    case Arch::sage: return "sage";
    case Arch::gae: return "gae";
    case Arch::ncn: return "ncn";
  }
  throw std::logic_error("unreachable");
}

struct ModelConfig {
  Arch arch = Arch::gcn;
  int layers = 2;
  int hidden = 256;
  double dropout = 0.5;
  double lr = 1e-3;
  int epochs = 500;
  int patience = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (layers < 1) throw ValidationError("model layers must be >= 1");
    if (hidden < 1) throw ValidationError("model hidden size must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ValidationError("dropout must lie in [0, 1)");
    }
    if (patience < 1) throw ValidationError("patience must be >= 1");
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
    if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  }
};

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;
};

// All trainable state in a fixed tensor order; the optimizer, the gradient
// checker, and the checkpoint format all walk the same list.
struct ModelParams {
  Arch arch = Arch::mlp;
  int layers = 0;
  int input_dim = 0;
  int hidden = 0;
  std::vector<Tensor> tensors;

  Tensor& find(const std::string& name) {
    for (auto& t : tensors) {
      if (t.name == name) return t;
    }
    throw std::logic_error("missing tensor: " + name);
  }
  const Tensor& find(const std::string& name) const {
    return const_cast<ModelParams*>(this)->find(name);
  }
};

// Train-edge message passing structures: symmetric-normalized adjacency with
// self-loops for GCN/GAE, row-normalized neighbor averaging for SAGE, plain
// neighbor lists for common-neighbor lookups.
struct GraphContext {
  int n = 0;
  Eigen::SparseMatrix<double> a_hat;
  Eigen::SparseMatrix<double> mean_agg;
  Adjacency adj;

  static GraphContext build(std::span<const Edge> train_pos, int n) {
    GraphContext ctx;
    ctx.n = n;
    ctx.adj = Adjacency::from_edges(train_pos, n);

    std::vector<Eigen::Triplet<double>> a_trip;
    a_trip.reserve(train_pos.size() * 2 + static_cast<std::size_t>(n));
    std::vector<double> deg_tilde(static_cast<std::size_t>(n), 1.0);  // self-loop
    for (int u = 0; u < n; ++u) {
      deg_tilde[static_cast<std::size_t>(u)] += ctx.adj.degree(u);
    }
    auto inv_sqrt = [&](int u) { return 1.0 / std::sqrt(deg_tilde[static_cast<std::size_t>(u)]); };
    for (int u = 0; u < n; ++u) {
      a_trip.emplace_back(u, u, inv_sqrt(u) * inv_sqrt(u));
      for (int v : ctx.adj.neighbors[static_cast<std::size_t>(u)]) {
        a_trip.emplace_back(u, v, inv_sqrt(u) * inv_sqrt(v));
      }
    }
    ctx.a_hat.resize(n, n);
    ctx.a_hat.setFromTriplets(a_trip.begin(), a_trip.end());

    std::vector<Eigen::Triplet<double>> m_trip;
    for (int u = 0; u < n; ++u) {
      const int deg = ctx.adj.degree(u);
      if (deg == 0) continue;  // isolated nodes aggregate the zero vector
      for (int v : ctx.adj.neighbors[static_cast<std::size_t>(u)]) {
        m_trip.emplace_back(u, v, 1.0 / deg);
      }
    }
    ctx.mean_agg.resize(n, n);
    ctx.mean_agg.setFromTriplets(m_trip.begin(), m_trip.end());
    return ctx;
  }

  std::vector<int> common_neighbors(int u, int v) const {
    const auto& a = adj.neighbors[static_cast<std::size_t>(u)];
    const auto& b = adj.neighbors[static_cast<std::size_t>(v)];
    std::vector<int> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  }
};

inline Eigen::SparseMatrix<double> normalized_adjacency(std::span<const Edge> train_pos, int n) {
  return GraphContext::build(train_pos, n).a_hat;
}

namespace detail {

inline Eigen::MatrixXd xavier_uniform(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

inline bool has_bias(Arch arch) { return arch == Arch::mlp; }

inline bool has_scorer(Arch arch) { return arch != Arch::gae; }

inline int scorer_input_dim(Arch arch, int hidden) {
  return arch == Arch::ncn ? 2 * hidden : hidden;
}

// GCN-style propagation applies to gcn, gae, and the ncn encoder.
inline bool uses_a_hat(Arch arch) {
  return arch == Arch::gcn || arch == Arch::gae || arch == Arch::ncn;
}

}  // namespace detail

inline ModelParams init_params(const ModelConfig& cfg, int input_dim) {
  cfg.validate();
  if (input_dim < 1) throw ValidationError("feature dimension must be >= 1");
  ModelParams params;
  params.arch = cfg.arch;
  params.layers = cfg.layers;
  params.input_dim = input_dim;
  params.hidden = cfg.hidden;
  Rng rng(derive_seed(cfg.seed, 0x1a17));

  for (int l = 0; l < cfg.layers; ++l) {
    const int d_in = l == 0 ? input_dim : cfg.hidden;
    const int w_rows = cfg.arch == Arch::sage ? 2 * d_in : d_in;
    params.tensors.push_back(
        {"enc_w" + std::to_string(l), detail::xavier_uniform(w_rows, cfg.hidden, rng)});
    if (detail::has_bias(cfg.arch)) {
      params.tensors.push_back({"enc_b" + std::to_string(l), Eigen::MatrixXd::Zero(1, cfg.hidden)});
    }
  }
  if (detail::has_scorer(cfg.arch)) {
    const int d_s = detail::scorer_input_dim(cfg.arch, cfg.hidden);
    params.tensors.push_back({"scor_w0", detail::xavier_uniform(d_s, cfg.hidden, rng)});
    params.tensors.push_back({"scor_b0", Eigen::MatrixXd::Zero(1, cfg.hidden)});
    params.tensors.push_back({"scor_w1", detail::xavier_uniform(cfg.hidden, 1, rng)});
    params.tensors.push_back({"scor_b1", Eigen::MatrixXd::Zero(1, 1)});
  }
  return params;
}

// Per-layer inverted-dropout masks over the layer inputs; empty in eval mode.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

inline DropoutMasks make_dropout_masks(const ModelConfig& cfg, int n, int input_dim, Rng& rng) {
  DropoutMasks masks;
  if (cfg.dropout == 0.0) return masks;
  const double keep = 1.0 - cfg.dropout;
  for (int l = 0; l < cfg.layers; ++l) {
    const int d = l == 0 ? input_dim : cfg.hidden;
    Eigen::MatrixXd mask(n, d);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) mask(i, j) = rng.next_double() < keep ? 1.0 / keep : 0.0;
    }
    masks.push_back(std::move(mask));
  }
  return masks;
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // post-dropout inputs per layer
  std::vector<Eigen::MatrixXd> pre_activations;
  Eigen::MatrixXd h;
};

// Encoder forward pass. Masks may be empty (evaluation mode).
inline ForwardCache encode(const ModelParams& params, const Eigen::MatrixXd& features,
                           const GraphContext& ctx, const DropoutMasks& masks) {
  if (features.cols() != params.input_dim) {
    throw ValidationError("feature dimension " + std::to_string(features.cols()) +
                          " does not match model input dimension " +
                          std::to_string(params.input_dim));
  }
  if (features.rows() != ctx.n) {
    throw ValidationError("feature rows do not match graph node count");
  }
  ForwardCache cache;
  Eigen::MatrixXd h = features;
  for (int l = 0; l < params.layers; ++l) {
    if (!masks.empty()) h = h.cwiseProduct(masks[static_cast<std::size_t>(l)]);
    cache.layer_inputs.push_back(h);

    const auto& w = params.find("enc_w" + std::to_string(l)).value;
    Eigen::MatrixXd z;
    switch (params.arch) {
      case Arch::mlp:
        z = h * w;
        z.rowwise() += params.find("enc_b" + std::to_string(l)).value.row(0);
        break;
      case Arch::gcn:
      case Arch::gae:
      case Arch::ncn:
        z = ctx.a_hat * (h * w);
        break;
      case Arch::sage: {
        Eigen::MatrixXd c(h.rows(), 2 * h.cols());
        c << h, ctx.mean_agg * h;
        z = c * w;
        break;
      }
    }
    const bool linear_layer = params.arch == Arch::gae && l == params.layers - 1;
    cache.pre_activations.push_back(z);
    h = linear_layer ? z : z.cwiseMax(0.0);
  }
  cache.h = std::move(h);
  return cache;
}

// Backpropagate d(loss)/dH through the encoder, accumulating into grads
// (same tensor order as params).
inline void encode_backward(const ModelParams& params, const GraphContext& ctx,
                            const ForwardCache& cache, const DropoutMasks& masks,
                            Eigen::MatrixXd dh, std::vector<Tensor>& grads) {
  auto grad_of = [&grads](const std::string& name) -> Eigen::MatrixXd& {
    for (auto& t : grads) {
      if (t.name == name) return t.value;
    }
    throw std::logic_error("missing gradient tensor: " + name);
  };

  for (int l = params.layers - 1; l >= 0; --l) {
    const bool linear_layer = params.arch == Arch::gae && l == params.layers - 1;
    const auto& z = cache.pre_activations[static_cast<std::size_t>(l)];
    Eigen::MatrixXd dz = linear_layer
                             ? std::move(dh)
                             : (z.array() > 0.0).select(dh, Eigen::MatrixXd::Zero(z.rows(), z.cols()))
                                   .eval();
    const auto& h_in = cache.layer_inputs[static_cast<std::size_t>(l)];
    const auto& w = params.find("enc_w" + std::to_string(l)).value;

    switch (params.arch) {
      case Arch::mlp:
        grad_of("enc_w" + std::to_string(l)) += h_in.transpose() * dz;
        grad_of("enc_b" + std::to_string(l)) += dz.colwise().sum();
        dh = dz * w.transpose();
        break;
      case Arch::gcn:
      case Arch::gae:
      case Arch::ncn: {
        Eigen::MatrixXd a_dz = ctx.a_hat * dz;  // a_hat symmetric
        grad_of("enc_w" + std::to_string(l)) += h_in.transpose() * a_dz;
        dh = a_dz * w.transpose();
        break;
      }
      case Arch::sage: {
        Eigen::MatrixXd c(h_in.rows(), 2 * h_in.cols());
        c << h_in, ctx.mean_agg * h_in;
        grad_of("enc_w" + std::to_string(l)) += c.transpose() * dz;
        Eigen::MatrixXd dc = dz * w.transpose();
        const auto d = h_in.cols();
        dh = dc.leftCols(d) + ctx.mean_agg.transpose() * dc.rightCols(d);
        break;
      }
    }
    if (!masks.empty()) dh = dh.cwiseProduct(masks[static_cast<std::size_t>(l)]);
  }
}

namespace detail {

struct ScorerCache {
  Eigen::MatrixXd z_in;   // batch x scorer input dim
  Eigen::MatrixXd a1pre;  // batch x hidden
  Eigen::MatrixXd a1;
};

inline Eigen::MatrixXd scorer_inputs(const ModelParams& params, const GraphContext& ctx,
                                     const Eigen::MatrixXd& h, std::span<const Edge> edges) {
  const auto d = h.cols();
  Eigen::MatrixXd z(static_cast<Eigen::Index>(edges.size()),
                    detail::scorer_input_dim(params.arch, params.hidden));
  for (std::size_t b = 0; b < edges.size(); ++b) {
    const auto row = static_cast<Eigen::Index>(b);
    z.row(row).head(d) = h.row(edges[b].u).cwiseProduct(h.row(edges[b].v));
    if (params.arch == Arch::ncn) {
      Eigen::RowVectorXd cn_sum = Eigen::RowVectorXd::Zero(d);
      for (int w : ctx.common_neighbors(edges[b].u, edges[b].v)) cn_sum += h.row(w);
      z.row(row).tail(d) = cn_sum;
    }
  }
  return z;
}

}  // namespace detail

// Edge logits in the given order. GAE decodes by inner product; everything
// else runs the scorer MLP on the Hadamard product (NCN appends the summed
// common-neighbor representation).
inline Eigen::VectorXd score_edges(const ModelParams& params, const GraphContext& ctx,
                                   const Eigen::MatrixXd& h, std::span<const Edge> edges,
                                   detail::ScorerCache* cache = nullptr) {
  if (params.arch == Arch::gae) {
    Eigen::VectorXd logits(static_cast<Eigen::Index>(edges.size()));
    for (std::size_t b = 0; b < edges.size(); ++b) {
      logits(static_cast<Eigen::Index>(b)) = h.row(edges[b].u).dot(h.row(edges[b].v));
    }
    return logits;
  }
  detail::ScorerCache local;
  detail::ScorerCache& sc = cache ? *cache : local;
  sc.z_in = detail::scorer_inputs(params, ctx, h, edges);
  sc.a1pre = sc.z_in * params.find("scor_w0").value;
  sc.a1pre.rowwise() += params.find("scor_b0").value.row(0);
  sc.a1 = sc.a1pre.cwiseMax(0.0);
  Eigen::VectorXd logits = sc.a1 * params.find("scor_w1").value;
  logits.array() += params.find("scor_b1").value(0, 0);
  return logits;
}

inline double score_pair(const ModelParams& params, const GraphContext& ctx,
                         const Eigen::MatrixXd& h, int u, int v) {
  const Edge e{u, v};
  return score_edges(params, ctx, h, std::span<const Edge>(&e, 1))(0);
}

inline std::vector<Tensor> zero_like(const ModelParams& params) {
  std::vector<Tensor> grads;
  grads.reserve(params.tensors.size());
  for (const auto& t : params.tensors) {
    grads.push_back({t.name, Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols())});
  }
  return grads;
}

// Mean binary cross-entropy with logits and its analytic gradients.
// Labels are 1 for the first n_pos edges and 0 for the rest.
inline double loss_and_gradients(const ModelParams& params, const Eigen::MatrixXd& features,
                                 const GraphContext& ctx, std::span<const Edge> edges,
                                 std::size_t n_pos, const DropoutMasks& masks,
                                 std::vector<Tensor>& grads) {
  const auto cache = encode(params, features, ctx, masks);
  detail::ScorerCache sc;
  const Eigen::VectorXd logits = score_edges(params, ctx, cache.h, edges, &sc);

  const auto batch = static_cast<Eigen::Index>(edges.size());
  double loss = 0.0;
  Eigen::VectorXd dlogits(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double z = logits(b);
    const double y = b < static_cast<Eigen::Index>(n_pos) ? 1.0 : 0.0;
    // max(z,0) - y z + log(1 + exp(-|z|)) is the overflow-safe BCE form.
    loss += std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
    dlogits(b) = (1.0 / (1.0 + std::exp(-z)) - y) / static_cast<double>(batch);
  }
  loss /= static_cast<double>(batch);

  auto grad_of = [&grads](const std::string& name) -> Eigen::MatrixXd& {
    for (auto& t : grads) {
      if (t.name == name) return t.value;
    }
    throw std::logic_error("missing gradient tensor: " + name);
  };

  Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(cache.h.rows(), cache.h.cols());
  const auto d = cache.h.cols();
  if (params.arch == Arch::gae) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto& e = edges[static_cast<std::size_t>(b)];
      dh.row(e.u) += dlogits(b) * cache.h.row(e.v);
      dh.row(e.v) += dlogits(b) * cache.h.row(e.u);
    }
  } else {
    grad_of("scor_w1") += sc.a1.transpose() * dlogits;
    grad_of("scor_b1")(0, 0) += dlogits.sum();
    Eigen::MatrixXd da1 =
        (sc.a1pre.array() > 0.0)
            .select(dlogits * params.find("scor_w1").value.transpose(),
                    Eigen::MatrixXd::Zero(sc.a1pre.rows(), sc.a1pre.cols()));
    grad_of("scor_w0") += sc.z_in.transpose() * da1;
    grad_of("scor_b0") += da1.colwise().sum();
    Eigen::MatrixXd dz_in = da1 * params.find("scor_w0").value.transpose();
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto& e = edges[static_cast<std::size_t>(b)];
      dh.row(e.u) += dz_in.row(b).head(d).cwiseProduct(cache.h.row(e.v));
      dh.row(e.v) += dz_in.row(b).head(d).cwiseProduct(cache.h.row(e.u));
      if (params.arch == Arch::ncn) {
        for (int w : ctx.common_neighbors(e.u, e.v)) dh.row(w) += dz_in.row(b).tail(d);
      }
    }
  }
  encode_backward(params, ctx, cache, masks, std::move(dh), grads);
  return loss;
}

// Adam with bias correction; one state slot per tensor.
class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& params, double lr)
      : lr_(lr), m_(zero_like(params)), v_(zero_like(params)) {}

  void step(ModelParams& params, const std::vector<Tensor>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      auto& m = m_[i].value;
      auto& v = v_[i].value;
      const auto& g = grads[i].value;
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
      params.tensors[i].value.array() -=
          lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
    }
  }

 private:
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

inline std::vector<ScoredEdge> scored(const ModelParams& params, const GraphContext& ctx,
                                      const Eigen::MatrixXd& h, std::span<const Edge> pos,
                                      std::span<const Edge> neg) {
  std::vector<Edge> all(pos.begin(), pos.end());
  all.insert(all.end(), neg.begin(), neg.end());
  const Eigen::VectorXd logits = score_edges(params, ctx, h, all);
  std::vector<ScoredEdge> out;
  out.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    out.push_back({all[i].u, all[i].v, logits(static_cast<Eigen::Index>(i)),
                   i < pos.size() ? 1 : 0});
  }
  return out;
}

struct TrainResult {
  ModelParams params;        // best-validation snapshot
  ModelParams final_params;  // parameters after the last completed epoch
  double best_val_auroc = std::numeric_limits<double>::quiet_NaN();
  double final_val_auroc = std::numeric_limits<double>::quiet_NaN();
  int epochs_run = 0;
  std::vector<double> train_loss;
};

// Per-epoch resampled 1:1 train negatives: uniform non-train-edges. Only the
// train view is consulted so no future structure can leak into training.
inline std::vector<Edge> sample_train_negatives(const GraphContext& ctx, std::size_t count,
                                                Rng& rng) {
  std::vector<Edge> out;
  out.reserve(count);
  EdgeSet seen;
  const std::uint64_t total_pairs = static_cast<std::uint64_t>(ctx.n) *
                                    static_cast<std::uint64_t>(ctx.n - 1) / 2;
  std::size_t train_edges = 0;
  for (int u = 0; u < ctx.n; ++u) train_edges += static_cast<std::size_t>(ctx.adj.degree(u));
  train_edges /= 2;
  if (count > total_pairs - train_edges) {
    throw ValidationError("cannot sample " + std::to_string(count) + " train negatives");
  }
  while (out.size() < count) {
    const int u = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(ctx.n)));
    const int v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(ctx.n)));
    if (u == v) continue;
    const Edge e = make_edge(u, v);
    if (ctx.adj.connected(e.u, e.v)) continue;
    if (!seen.insert(edge_key(e)).second) continue;
    out.push_back(e);
  }
  return out;
}

inline TrainResult train_model(const ModelConfig& cfg, const Eigen::MatrixXd& features,
                               const EdgeSplit& split, const GraphContext& ctx) {
  cfg.validate();
  TrainResult result;
  result.params = init_params(cfg, static_cast<int>(features.cols()));
  result.final_params = result.params;
  if (cfg.epochs == 0) return result;
  if (split.train_pos.empty()) throw ValidationError("train_model: no training positives");
  if (split.val_pos.empty() || split.val_neg.empty()) {
    throw ValidationError("train_model: early stopping needs validation positives and negatives");
  }

  AdamOptimizer adam(result.params, cfg.lr);
  ModelParams best = result.params;
  double best_auroc = -1.0;
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(cfg.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
    auto negatives = sample_train_negatives(ctx, split.train_pos.size(), epoch_rng);
    std::vector<Edge> batch(split.train_pos.begin(), split.train_pos.end());
    batch.insert(batch.end(), negatives.begin(), negatives.end());

    auto masks = make_dropout_masks(cfg, ctx.n, result.params.input_dim, epoch_rng);
    auto grads = zero_like(result.params);
    const double loss = loss_and_gradients(result.params, features, ctx, batch,
                                           split.train_pos.size(), masks, grads);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("training diverged (non-finite loss) at epoch " +
                               std::to_string(epoch));
    }
    adam.step(result.params, grads);
    for (const auto& t : result.params.tensors) {
      if (!t.value.allFinite()) {
        throw std::runtime_error("training diverged (non-finite parameters) at epoch " +
                                 std::to_string(epoch));
      }
    }
    result.train_loss.push_back(loss);
    result.epochs_run = epoch;

    const auto eval_cache = encode(result.params, features, ctx, {});
    const auto val_scored =
        scored(result.params, ctx, eval_cache.h, split.val_pos, split.val_neg);
    for (const auto& s : val_scored) {
      if (!std::isfinite(s.score)) {
        throw std::runtime_error("training diverged (non-finite validation score) at epoch " +
                                 std::to_string(epoch));
      }
    }
    const double val_auroc = auroc(val_scored);
    result.final_val_auroc = val_auroc;
    if (val_auroc > best_auroc) {
      best_auroc = val_auroc;
      best = result.params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  result.final_params = result.params;
  result.params = std::move(best);
  result.best_val_auroc = best_auroc;
  return result;
}

// Max relative error between analytic and central-difference gradients over
// every parameter entry; denominators are floored at 1e-8 so dead-ReLU zeros
// do not divide by zero.
inline double gradient_check(const ModelConfig& cfg_in, int n, int input_dim,
                             std::uint64_t instance_seed) {
  ModelConfig cfg = cfg_in;
  cfg.dropout = 0.0;  // the check probes the deterministic loss surface
  Rng rng(instance_seed);

  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.next_double() < 0.35) edges.push_back({u, v});
    }
  }
  if (edges.size() < 4) edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  auto ctx = GraphContext::build(edges, n);

  Eigen::MatrixXd features(n, input_dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < input_dim; ++j) features(i, j) = rng.normal();
  }

  std::vector<Edge> batch;
  std::size_t n_pos = std::min<std::size_t>(edges.size(), 6);
  batch.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_pos));
  std::size_t added = 0;
  for (int u = 0; u < n && added < 6; ++u) {
    for (int v = u + 1; v < n && added < 6; ++v) {
      if (!ctx.adj.connected(u, v)) {
        batch.push_back({u, v});
        ++added;
      }
    }
  }

  auto params = init_params(cfg, input_dim);
  // Jitter every parameter (biases start at zero) so no ReLU pre-activation
  // sits exactly on the kink, where central differences and the subgradient
  // legitimately disagree.
  for (auto& t : params.tensors) {
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.value.cols(); ++j) t.value(i, j) += rng.uniform(-0.1, 0.1);
    }
  }
  auto grads = zero_like(params);
  loss_and_gradients(params, features, ctx, batch, n_pos, {}, grads);

  auto loss_at = [&](const ModelParams& p) {
    auto scratch = zero_like(p);
    return loss_and_gradients(p, features, ctx, batch, n_pos, {}, scratch);
  };

  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& value = params.tensors[t].value;
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        const double saved = value(i, j);
        value(i, j) = saved + h;
        const double up = loss_at(params);
        value(i, j) = saved - h;
        const double down = loss_at(params);
        value(i, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads[t].value(i, j);
        // Central differences on a double-precision loss resolve gradients to
        // about eps/(2h) ~ 1e-11; disagreements below 1e-9 are roundoff, not
        // signal, so they cannot indict the analytic gradient.
        const double diff = std::abs(numeric - analytic);
        if (diff < 1e-9) continue;
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        max_rel = std::max(max_rel, diff / denom);
      }
    }
  }
  return max_rel;
}

inline void save_model(const std::string& path, const ModelConfig& cfg,
                       const ModelParams& params) {
  nlohmann::json j;
  j["version"] = 1;
  j["config"] = {{"arch", arch_name(cfg.arch)}, {"layers", cfg.layers},
                 {"hidden", cfg.hidden},        {"dropout", cfg.dropout},
                 {"lr", cfg.lr},                {"epochs", cfg.epochs},
                 {"patience", cfg.patience},    {"seed", cfg.seed}};
  j["input_dim"] = params.input_dim;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.tensors) {
    nlohmann::json entry;
    entry["name"] = t.name;
    entry["rows"] = t.value.rows();
    entry["cols"] = t.value.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.value.size()));
    for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
      for (Eigen::Index j2 = 0; j2 < t.value.cols(); ++j2) data.push_back(t.value(i, j2));
    }
    entry["data"] = std::move(data);
    tensors.push_back(std::move(entry));
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << '\n';
}

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
};

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("version").get<int>() != 1) {
    throw ValidationError("unsupported checkpoint version in " + path);
  }
  LoadedModel out;
  const auto& c = j.at("config");
  out.config.arch = parse_arch(c.at("arch").get<std::string>());
  out.config.layers = c.at("layers").get<int>();
  out.config.hidden = c.at("hidden").get<int>();
  out.config.dropout = c.at("dropout").get<double>();
  out.config.lr = c.at("lr").get<double>();
  out.config.epochs = c.at("epochs").get<int>();
  out.config.patience = c.at("patience").get<int>();
  out.config.seed = c.at("seed").get<std::uint64_t>();

  out.params.arch = out.config.arch;
  out.params.layers = out.config.layers;
  out.params.hidden = out.config.hidden;
  out.params.input_dim = j.at("input_dim").get<int>();
  for (const auto& entry : j.at("tensors")) {
    Tensor t;
    t.name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw ValidationError("tensor size mismatch in checkpoint " + path);
    }
    t.value.resize(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j2 = 0; j2 < cols; ++j2) t.value(i, j2) = data[k++];
    }
    out.params.tensors.push_back(std::move(t));
  }
  return out;
}

}  // namespace qclp
