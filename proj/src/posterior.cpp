#include "bdice/posterior.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "bdice/kernels.hpp"
#include "bdice/rng.hpp"

namespace bdice {

using nlohmann::json;
namespace k = bdice::kernels;

namespace {

constexpr double kAdamBeta1 = 0.99;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kDivergenceCap = 1e6;

struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;  // normalized so E[f(Z)] = sum w_i f(sqrt(2) x_i)
};

const GaussHermite& gauss_hermite64() {
  static const GaussHermite rule = [] {
    constexpr int N = 64;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(N, N);
    for (int i = 1; i < N; ++i) {
      const double b = std::sqrt(i / 2.0);
      jacobi(i, i - 1) = b;
      jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussHermite rule;
    rule.nodes = es.eigenvalues();
    rule.weights.resize(N);
    for (int i = 0; i < N; ++i) {
      const double v0 = es.eigenvectors()(0, i);
      rule.weights(i) = v0 * v0;  // already sums to 1 under this normalization
    }
    return rule;
  }();
  return rule;
}

double softplus_scalar(double x) {
  double out;
  k::vsoftplus(&x, &out, 1);
  return out;
}

// Compressed per-tuple feature rows for the one_hot map: the current index,
// the policy-averaged next-state indices (gamma-scaled weights) and the
// policy-averaged initial-state indices.
struct OneHotRows {
  int m = 0;
  int A = 0;
  std::vector<std::int32_t> cur;
  std::vector<std::int32_t> nidx;
  std::vector<double> nwt;
  std::vector<std::int32_t> iidx;
  std::vector<double> iwt;
};

// Dense per-tuple rows for general feature maps (row-major for row access).
struct DenseRows {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Mat phi;    // phi(s,a)
  Mat gnext;  // gamma*phibar(s') - phi(s,a)
  Mat finit;  // phibar_pi(s0)
};

// Whole-dataset aggregation used in full-batch mode: one group per distinct
// (s,a), with next-feature weights pre-divided by n.
struct GroupedRows {
  int m = 0;
  std::vector<std::int32_t> gidx;
  std::vector<double> cnt_frac;
  std::vector<int> nofs;
  std::vector<std::int32_t> njdx;
  std::vector<double> njwt;
  std::vector<double> init_vec;  // (1-gamma) * mean phibar_pi(s0), length m
};

struct Workspace {
  std::vector<double> sigma, w, gw, gmu, gls, ehat, cvec;
  std::vector<double> pre, zeta, sig;
  std::vector<std::int32_t> bcur;
};

class LossEngine {
 public:
  LossEngine(const TupleDataset& ds, const TabularPolicy& target, const FeatureMap& fm,
             double gamma)
      : ds_(ds), target_(target), fm_(fm), gamma_(gamma) {
    if (fm.kind == FeatureKind::one_hot)
      build_one_hot();
    else
      build_dense();
  }

  int dim() const { return fm_.dim; }

  // Averaged constraint/norm terms over the noise draws plus their gradient
  // contribution (without the KL part). noise is K x m row-major.
  void eval_batch(std::span<const int> batch, const double* mu, const double* sigma,
                  const double* noise, int draws, double inv_draws, double kappa,
                  double kappa_n, Workspace& ws, double& constraint_term,
                  double& norm_term, bool want_grad) const {
    const int m = fm_.dim;
    const std::size_t B = batch.size();
    const double invB = 1.0 / static_cast<double>(B);
    ws.pre.resize(B);
    ws.zeta.resize(B);
    ws.sig.resize(B);
    ws.w.resize(m);
    ws.gw.assign(m, 0.0);
    ws.ehat.resize(m);
    ws.cvec.assign(m, 0.0);
    constraint_term = 0.0;
    norm_term = 0.0;

    const bool onehot = fm_.kind == FeatureKind::one_hot;
    const int A = onehot ? oh_.A : 0;
    if (onehot) {
      ws.bcur.resize(B);
      for (std::size_t i = 0; i < B; ++i) ws.bcur[i] = oh_.cur[batch[i]];
    }
    // initial-state term, shared by all draws
    if (gamma_ < 1.0) {
      const double scale = (1.0 - gamma_) * invB;
      if (onehot) {
        for (std::size_t i = 0; i < B; ++i) {
          const std::size_t row = static_cast<std::size_t>(batch[i]) * A;
          for (int a = 0; a < A; ++a) ws.cvec[oh_.iidx[row + a]] += scale * oh_.iwt[row + a];
        }
      } else {
        for (std::size_t i = 0; i < B; ++i)
          k::vaxpy(scale, dense_.finit.row(batch[i]).data(), ws.cvec.data(), m);
      }
    }

    for (int d = 0; d < draws; ++d) {
      const double* xi = noise + static_cast<std::size_t>(d) * m;
      k::vreparam(mu, sigma, xi, ws.w.data(), m);
      if (onehot) {
        k::vgather(ws.w.data(), ws.bcur.data(), ws.pre.data(), B);
      } else {
        for (std::size_t i = 0; i < B; ++i)
          ws.pre[i] = k::vdot(dense_.phi.row(batch[i]).data(), ws.w.data(), m);
      }
      k::vsoftplus(ws.pre.data(), ws.zeta.data(), B);

      std::copy(ws.cvec.begin(), ws.cvec.end(), ws.ehat.begin());
      if (onehot) {
        for (std::size_t i = 0; i < B; ++i) {
          const double zi = ws.zeta[i] * invB;
          ws.ehat[ws.bcur[i]] -= zi;
          const std::size_t row = static_cast<std::size_t>(batch[i]) * A;
          for (int a = 0; a < A; ++a) ws.ehat[oh_.nidx[row + a]] += zi * oh_.nwt[row + a];
        }
      } else {
        for (std::size_t i = 0; i < B; ++i)
          k::vaxpy(ws.zeta[i] * invB, dense_.gnext.row(batch[i]).data(), ws.ehat.data(),
                   m);
      }
      const double half_sq = 0.5 * k::vsumsq(ws.ehat.data(), m);
      const double zbar = k::vsum(ws.zeta.data(), B) * invB;
      constraint_term += half_sq * inv_draws;
      norm_term += (zbar - 1.0) * (zbar - 1.0) * inv_draws;
      if (!want_grad) continue;

      k::vsigmoid(ws.pre.data(), ws.sig.data(), B);
      const double norm_coef = kappa_n * 2.0 * (zbar - 1.0) * invB;
      std::fill(ws.gw.begin(), ws.gw.end(), 0.0);
      if (onehot) {
        for (std::size_t i = 0; i < B; ++i) {
          const std::size_t row = static_cast<std::size_t>(batch[i]) * A;
          double gsum = -ws.ehat[ws.bcur[i]];
          for (int a = 0; a < A; ++a) gsum += oh_.nwt[row + a] * ws.ehat[oh_.nidx[row + a]];
          const double coef = kappa * gsum * invB + norm_coef;
          ws.gw[ws.bcur[i]] += ws.sig[i] * coef;
        }
      } else {
        for (std::size_t i = 0; i < B; ++i) {
          const double gsum = k::vdot(dense_.gnext.row(batch[i]).data(), ws.ehat.data(), m);
          const double coef = kappa * gsum * invB + norm_coef;
          k::vaxpy(ws.sig[i] * coef, dense_.phi.row(batch[i]).data(), ws.gw.data(), m);
        }
      }
      k::vaxpy(inv_draws, ws.gw.data(), ws.gmu.data(), m);
      k::vgrad_scale(ws.gw.data(), xi, sigma, inv_draws, ws.gls.data(), m);
    }
  }

  // Full-batch evaluation through the (s,a) aggregation; mathematically the
  // same objective with the per-tuple sums regrouped.
  void eval_grouped(const double* mu, const double* sigma, const double* noise,
                    int draws, double inv_draws, double kappa, double kappa_n,
                    Workspace& ws, double& constraint_term, double& norm_term) const {
    const int m = fm_.dim;
    const auto& g = grouped_;
    const std::size_t G = g.gidx.size();
    ws.pre.resize(G);
    ws.zeta.resize(G);
    ws.sig.resize(G);
    ws.w.resize(m);
    ws.gw.assign(m, 0.0);
    ws.ehat.resize(m);
    constraint_term = 0.0;
    norm_term = 0.0;
    for (int d = 0; d < draws; ++d) {
      const double* xi = noise + static_cast<std::size_t>(d) * m;
      k::vreparam(mu, sigma, xi, ws.w.data(), m);
      k::vgather(ws.w.data(), g.gidx.data(), ws.pre.data(), G);
      k::vsoftplus(ws.pre.data(), ws.zeta.data(), G);
      std::copy(g.init_vec.begin(), g.init_vec.end(), ws.ehat.begin());
      for (std::size_t i = 0; i < G; ++i) {
        ws.ehat[g.gidx[i]] -= g.cnt_frac[i] * ws.zeta[i];
        for (int e = g.nofs[i]; e < g.nofs[i + 1]; ++e)
          ws.ehat[g.njdx[e]] += ws.zeta[i] * g.njwt[e];
      }
      const double half_sq = 0.5 * k::vsumsq(ws.ehat.data(), m);
      const double zbar = k::vdot(g.cnt_frac.data(), ws.zeta.data(), G);
      constraint_term += half_sq * inv_draws;
      norm_term += (zbar - 1.0) * (zbar - 1.0) * inv_draws;

      k::vsigmoid(ws.pre.data(), ws.sig.data(), G);
      const double norm_coef = kappa_n * 2.0 * (zbar - 1.0);
      std::fill(ws.gw.begin(), ws.gw.end(), 0.0);
      for (std::size_t i = 0; i < G; ++i) {
        double gsum = -g.cnt_frac[i] * ws.ehat[g.gidx[i]];
        for (int e = g.nofs[i]; e < g.nofs[i + 1]; ++e)
          gsum += g.njwt[e] * ws.ehat[g.njdx[e]];
        const double coef = kappa * gsum + norm_coef * g.cnt_frac[i];
        ws.gw[g.gidx[i]] += ws.sig[i] * coef;
      }
      k::vaxpy(inv_draws, ws.gw.data(), ws.gmu.data(), m);
      k::vgrad_scale(ws.gw.data(), xi, sigma, inv_draws, ws.gls.data(), m);
    }
  }

  void build_grouped() {
    if (!grouped_.gidx.empty() || ds_.tuples.empty()) return;
    if (fm_.kind != FeatureKind::one_hot)
      throw std::logic_error("grouped evaluation requires one_hot features");
    const int m = fm_.dim;
    const std::size_t n = ds_.tuples.size();
    const double invN = 1.0 / static_cast<double>(n);
    std::vector<std::int32_t> group_of(m, -1);
    std::vector<std::vector<std::pair<std::int32_t, double>>> next_rows;
    GroupedRows g;
    g.m = m;
    g.init_vec.assign(m, 0.0);
    const int A = oh_.A;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t cur = oh_.cur[i];
      if (group_of[cur] < 0) {
        group_of[cur] = static_cast<std::int32_t>(g.gidx.size());
        g.gidx.push_back(cur);
        g.cnt_frac.push_back(0.0);
        next_rows.emplace_back();
      }
      const std::int32_t gi = group_of[cur];
      g.cnt_frac[gi] += invN;
      const std::size_t row = i * A;
      auto& acc = next_rows[gi];
      for (int a = 0; a < A; ++a) {
        const std::int32_t j = oh_.nidx[row + a];
        const double wt = oh_.nwt[row + a] * invN;
        auto it = std::find_if(acc.begin(), acc.end(),
                               [j](const auto& p) { return p.first == j; });
        if (it == acc.end())
          acc.emplace_back(j, wt);
        else
          it->second += wt;
      }
      if (gamma_ < 1.0) {
        const double scale = (1.0 - gamma_) * invN;
        for (int a = 0; a < A; ++a)
          g.init_vec[oh_.iidx[row + a]] += scale * oh_.iwt[row + a];
      }
    }
    g.nofs.assign(g.gidx.size() + 1, 0);
    for (std::size_t gi = 0; gi < next_rows.size(); ++gi) {
      std::sort(next_rows[gi].begin(), next_rows[gi].end());
      g.nofs[gi + 1] = g.nofs[gi] + static_cast<int>(next_rows[gi].size());
      for (const auto& [j, wt] : next_rows[gi]) {
        g.njdx.push_back(j);
        g.njwt.push_back(wt);
      }
    }
    grouped_ = std::move(g);
  }

 private:
  void build_one_hot() {
    const int A = fm_.num_actions;
    const std::size_t n = ds_.tuples.size();
    oh_.m = fm_.dim;
    oh_.A = A;
    oh_.cur.resize(n);
    oh_.nidx.resize(n * A);
    oh_.nwt.resize(n * A);
    oh_.iidx.resize(n * A);
    oh_.iwt.resize(n * A);
    for (std::size_t i = 0; i < n; ++i) {
      const Transition& t = ds_.tuples[i];
      oh_.cur[i] = fm_.onehot_index(t.state, t.action);
      const std::size_t row = i * A;
      for (int a = 0; a < A; ++a) {
        oh_.nidx[row + a] = fm_.onehot_index(t.next_state, a);
        oh_.nwt[row + a] = gamma_ * target_.prob(t.next_state, a);
        oh_.iidx[row + a] = fm_.onehot_index(t.init_state, a);
        oh_.iwt[row + a] = target_.prob(t.init_state, a);
      }
    }
  }

  void build_dense() {
    const int m = fm_.dim;
    const std::size_t n = ds_.tuples.size();
    dense_.phi.resize(n, m);
    dense_.gnext.resize(n, m);
    dense_.finit.resize(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      const Transition& t = ds_.tuples[i];
      fm_.write(t.state, t.action, dense_.phi.row(i).data());
      double* gnext = dense_.gnext.row(i).data();
      for (int j = 0; j < m; ++j) gnext[j] = 0.0;
      fm_.accumulate_policy_avg(target_, t.next_state, gamma_, gnext);
      for (int j = 0; j < m; ++j) gnext[j] -= dense_.phi(i, j);
      double* finit = dense_.finit.row(i).data();
      for (int j = 0; j < m; ++j) finit[j] = 0.0;
      fm_.accumulate_policy_avg(target_, t.init_state, 1.0, finit);
    }
  }

  const TupleDataset& ds_;
  const TabularPolicy& target_;
  const FeatureMap& fm_;
  double gamma_;
  OneHotRows oh_;
  DenseRows dense_;
  GroupedRows grouped_;
};

void check_feature_dims(const FeatureMap& fm, const TupleDataset& ds,
                        const TabularPolicy& target) {
  if (target.num_states != fm.num_states || target.num_actions != fm.num_actions)
    throw std::invalid_argument("target policy does not match the feature map");
  if (ds.meta.num_states > 0 &&
      (ds.meta.num_states != fm.num_states || ds.meta.num_actions != fm.num_actions))
    throw std::invalid_argument("dataset does not match the feature map");
}

double kl_and_grad(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_sigma,
                   const Eigen::VectorXd& sig, double prior_mu, double prior_sigma,
                   double* gmu, double* gls) {
  const double sp2 = prior_sigma * prior_sigma;
  double kl = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    const double dm = mu(i) - prior_mu;
    const double s2 = sig(i) * sig(i);
    kl += std::log(prior_sigma) - log_sigma(i) + (s2 + dm * dm) / (2.0 * sp2) - 0.5;
    if (gmu) gmu[i] += dm / sp2;
    if (gls) gls[i] += s2 / sp2 - 1.0;
  }
  return kl;
}

}  // namespace

void BayesDiceConfig::validate() const {
  if (norm_weight >= 0.0 && norm_weight != norm_weight)
    throw std::invalid_argument("norm_weight is NaN");
  if (prior_sigma <= 0.0) throw std::invalid_argument("prior_sigma must be positive");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (steps <= 0) throw std::invalid_argument("steps must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (mc_samples_per_step <= 0)
    throw std::invalid_argument("mc_samples_per_step must be positive");
}

double RatioPosterior::mean_zeta(int s, int a) const {
  const Eigen::VectorXd phi = feature_map.features(s, a);
  const double mean = phi.dot(mu);
  const Eigen::VectorXd sig = sigma();
  double var = 0.0;
  for (int i = 0; i < phi.size(); ++i) var += sig(i) * sig(i) * phi(i) * phi(i);
  const double sd = std::sqrt(var);
  const auto& gh = gauss_hermite64();
  double acc = 0.0;
  const double sq2 = std::sqrt(2.0);
  for (int i = 0; i < gh.nodes.size(); ++i)
    acc += gh.weights(i) * softplus_scalar(mean + sq2 * sd * gh.nodes(i));
  return acc;
}

Eigen::VectorXd residual_embedding(std::span<const double> zeta, const TupleDataset& ds,
                                   std::span<const int> batch,
                                   const TabularPolicy& target, const FeatureMap& fm,
                                   double gamma) {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  if (zeta.size() != batch.size())
    throw std::invalid_argument("zeta and batch sizes differ");
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("gamma outside (0,1]");
  check_feature_dims(fm, ds, target);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(fm.dim);
  const double invB = 1.0 / static_cast<double>(batch.size());
  Eigen::VectorXd phi(fm.dim);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = ds.tuples.at(batch[i]);
    fm.write(t.state, t.action, phi.data());
    e -= (zeta[i] * invB) * phi;
    fm.accumulate_policy_avg(target, t.next_state, gamma * zeta[i] * invB, e.data());
    if (gamma < 1.0)
      fm.accumulate_policy_avg(target, t.init_state, (1.0 - gamma) * invB, e.data());
  }
  return e;
}

ChanceLossResult chance_loss(const RatioPosterior& posterior, const TupleDataset& ds,
                             std::span<const int> batch, const TabularPolicy& target,
                             const BayesDiceConfig& cfg, const Eigen::MatrixXd& noise) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  const FeatureMap& fm = posterior.feature_map;
  check_feature_dims(fm, ds, target);
  if (noise.cols() != fm.dim || noise.rows() < 1)
    throw std::invalid_argument("noise must be draws x dim");
  for (int i : batch)
    if (i < 0 || static_cast<std::size_t>(i) >= ds.tuples.size())
      throw std::invalid_argument("batch index out of range");

  const double kappa = cfg.resolved_constraint_weight(ds.tuples.size());
  const double kappa_n = cfg.resolved_norm_weight(ds.tuples.size());
  const int m = fm.dim;
  LossEngine engine(ds, target, fm, ds.meta.gamma);

  ChanceLossResult out;
  out.grad_mu = Eigen::VectorXd::Zero(m);
  out.grad_log_sigma = Eigen::VectorXd::Zero(m);
  Workspace ws;
  ws.gmu.assign(m, 0.0);
  ws.gls.assign(m, 0.0);
  const Eigen::VectorXd sig = posterior.sigma();
  // noise rows must be contiguous row-major for the engine
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> noise_rm = noise;
  double constraint = 0.0, norm = 0.0;
  const int draws = static_cast<int>(noise.rows());
  engine.eval_batch(batch, posterior.mu.data(), sig.data(), noise_rm.data(), draws,
                    1.0 / draws, kappa, kappa_n, ws, constraint, norm, true);
  out.constraint = kappa * constraint;
  out.norm_penalty = kappa_n * norm;
  for (int i = 0; i < m; ++i) {
    out.grad_mu(i) = ws.gmu[i];
    out.grad_log_sigma(i) = ws.gls[i];  // sigma factor applied by vgrad_scale
  }
  out.kl = kl_and_grad(posterior.mu, posterior.log_sigma, sig, cfg.prior_mu,
                       cfg.prior_sigma, out.grad_mu.data(), out.grad_log_sigma.data());
  out.total = out.kl + out.constraint + out.norm_penalty;
  if (!std::isfinite(out.total))
    throw std::runtime_error(
        "chance loss is not finite (check learning rate / prior configuration)");
  return out;
}

RatioPosterior train_posterior(const TupleDataset& ds, const TabularPolicy& target,
                               const FeatureMap& fm, const BayesDiceConfig& cfg) {
  cfg.validate();
  if (ds.tuples.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  check_feature_dims(fm, ds, target);
  const double gamma = ds.meta.gamma;
  if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("dataset gamma outside (0,1]");
  const std::size_t n = ds.tuples.size();
  const double kappa = cfg.resolved_constraint_weight(n);
  const double kappa_n = cfg.resolved_norm_weight(n);
  if (gamma == 1.0 && kappa_n <= 0.0)
    throw std::invalid_argument(
        "gamma = 1 requires a positive norm_weight (normalization constraint)");

  const int m = fm.dim;
  const std::size_t B = std::min<std::size_t>(cfg.batch_size, n);
  LossEngine engine(ds, target, fm, gamma);
  const bool grouped = fm.kind == FeatureKind::one_hot && B >= n;
  if (grouped) engine.build_grouped();

  RatioPosterior post;
  post.feature_map = fm;
  post.mu = Eigen::VectorXd::Constant(m, cfg.prior_mu);
  post.log_sigma = Eigen::VectorXd::Constant(m, std::log(cfg.prior_sigma));

  const int K = cfg.mc_samples_per_step;
  const double invK = 1.0 / K;
  Rng rng(cfg.seed);
  std::vector<int> batch(B);
  std::vector<double> noise(static_cast<std::size_t>(K) * m);
  Workspace ws;
  Eigen::VectorXd sig(m);
  std::vector<double> gmu(m), gls(m);
  std::vector<double> adam_m(2 * static_cast<std::size_t>(m), 0.0);
  std::vector<double> adam_v(2 * static_cast<std::size_t>(m), 0.0);
  std::vector<double> params(2 * static_cast<std::size_t>(m));
  std::vector<double> grad(2 * static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    params[i] = post.mu(i);
    params[m + i] = post.log_sigma(i);
  }

  double bias1 = 1.0, bias2 = 1.0;
  for (int step = 0; step < cfg.steps; ++step) {
    if (!grouped)
      for (auto& b : batch) b = static_cast<int>(rng.below(n));
    for (auto& x : noise) x = rng.normal();

    k::vexp(params.data() + m, sig.data(), m);
    ws.gmu.assign(m, 0.0);
    ws.gls.assign(m, 0.0);
    double constraint = 0.0, norm = 0.0;
    if (grouped)
      engine.eval_grouped(params.data(), sig.data(), noise.data(), K, invK, kappa,
                          kappa_n, ws, constraint, norm);
    else
      engine.eval_batch(batch, params.data(), sig.data(), noise.data(), K, invK, kappa,
                        kappa_n, ws, constraint, norm, true);

    for (int i = 0; i < m; ++i) {
      grad[i] = ws.gmu[i];
      grad[m + i] = ws.gls[i];  // sigma factor applied by vgrad_scale
    }
    Eigen::Map<Eigen::VectorXd> mu_map(params.data(), m);
    Eigen::Map<Eigen::VectorXd> ls_map(params.data() + m, m);
    const double kl = kl_and_grad(mu_map, ls_map, sig, cfg.prior_mu, cfg.prior_sigma,
                                  grad.data(), grad.data() + m);
    const double loss = kl + kappa * constraint + kappa_n * norm;
    if (!std::isfinite(loss) || loss > kDivergenceCap)
      throw std::runtime_error("training diverged at step " + std::to_string(step) +
                               " (loss " + std::to_string(loss) +
                               "); lower the learning rate or widen the prior");

    bias1 *= kAdamBeta1;
    bias2 *= kAdamBeta2;
    k::adam_step(params.data(), adam_m.data(), adam_v.data(), grad.data(), 2 * m,
                 cfg.learning_rate, kAdamBeta1, kAdamBeta2, kAdamEps, 1.0 / (1.0 - bias1),
                 1.0 / (1.0 - bias2));
  }
  for (int i = 0; i < m; ++i) {
    post.mu(i) = params[i];
    post.log_sigma(i) = params[m + i];
  }
  return post;
}

std::vector<double> sample_policy_values(const RatioPosterior& posterior,
                                         const TupleDataset& ds, int num_draws,
                                         std::uint64_t seed) {
  if (ds.tuples.empty()) throw std::invalid_argument("empty dataset");
  if (num_draws < 1) throw std::invalid_argument("num_draws must be >= 1");
  const FeatureMap& fm = posterior.feature_map;
  const int m = fm.dim;
  const double invN = 1.0 / static_cast<double>(ds.tuples.size());

  // aggregate reward mass per distinct (s,a); zeta is constant within a group
  std::vector<double> rsum(static_cast<std::size_t>(fm.num_states) * fm.num_actions, 0.0);
  for (const Transition& t : ds.tuples) {
    if (t.state < 0 || t.state >= fm.num_states || t.action < 0 ||
        t.action >= fm.num_actions)
      throw std::invalid_argument("dataset tuple outside the feature map range");
    rsum[static_cast<std::size_t>(t.state) * fm.num_actions + t.action] +=
        t.reward * invN;
  }
  std::vector<std::int32_t> gidx;
  std::vector<double> gwt;
  std::vector<int> gs, ga;
  for (int s = 0; s < fm.num_states; ++s)
    for (int a = 0; a < fm.num_actions; ++a) {
      const double w = rsum[static_cast<std::size_t>(s) * fm.num_actions + a];
      if (w == 0.0) continue;
      gs.push_back(s);
      ga.push_back(a);
      gidx.push_back(fm.onehot_index(s, a));
      gwt.push_back(w);
    }
  const std::size_t G = gwt.size();
  DenseRows::Mat phi;
  if (fm.kind != FeatureKind::one_hot) {
    phi.resize(G, m);
    for (std::size_t g = 0; g < G; ++g) fm.write(gs[g], ga[g], phi.row(g).data());
  }

  const Eigen::VectorXd sig = posterior.sigma();
  Rng rng(seed);
  std::vector<double> xi(m), w(m), pre(G), zeta(G);
  std::vector<double> out(num_draws);
  for (int d = 0; d < num_draws; ++d) {
    for (auto& x : xi) x = rng.normal();
    k::vreparam(posterior.mu.data(), sig.data(), xi.data(), w.data(), m);
    if (fm.kind == FeatureKind::one_hot) {
      k::vgather(w.data(), gidx.data(), pre.data(), G);
    } else {
      for (std::size_t g = 0; g < G; ++g)
        pre[g] = k::vdot(phi.row(g).data(), w.data(), m);
    }
    k::vsoftplus(pre.data(), zeta.data(), G);
    out[d] = k::vdot(zeta.data(), gwt.data(), G);
  }
  return out;
}

double empirical_quantile(std::span<const double> sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("quantile of empty sample");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::pair<double, double> interval_from_samples(std::span<const double> samples,
                                                double confidence) {
  if (samples.size() < 2)
    throw std::invalid_argument("interval needs at least two samples");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw std::invalid_argument("confidence must lie in (0,1)");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = empirical_quantile(sorted, (1.0 - confidence) / 2.0);
  const double hi = empirical_quantile(sorted, (1.0 + confidence) / 2.0);
  return {lo, hi};
}

namespace {

json feature_map_to_json(const FeatureMap& fm) {
  json j = {{"kind", fm.kind == FeatureKind::one_hot ? "one_hot" : "random_fourier"},
            {"dim", fm.dim},
            {"num_states", fm.num_states},
            {"num_actions", fm.num_actions}};
  if (fm.kind == FeatureKind::random_fourier) {
    j["bandwidth"] = fm.bandwidth;
    json freq = json::array();
    for (int i = 0; i < fm.dim; ++i) freq.push_back({fm.freq(i, 0), fm.freq(i, 1)});
    j["freq"] = freq;
    j["phase"] = std::vector<double>(fm.phase.data(), fm.phase.data() + fm.dim);
  }
  return j;
}

FeatureMap feature_map_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "one_hot")
    return FeatureMap::one_hot(j.at("num_states").get<int>(),
                               j.at("num_actions").get<int>());
  if (kind != "random_fourier") throw std::runtime_error("unknown feature map kind");
  FeatureMap fm;
  fm.kind = FeatureKind::random_fourier;
  fm.num_states = j.at("num_states").get<int>();
  fm.num_actions = j.at("num_actions").get<int>();
  fm.dim = j.at("dim").get<int>();
  fm.bandwidth = j.at("bandwidth").get<double>();
  fm.freq.resize(fm.dim, 2);
  fm.phase.resize(fm.dim);
  const auto& freq = j.at("freq");
  const auto phase = j.at("phase").get<std::vector<double>>();
  for (int i = 0; i < fm.dim; ++i) {
    fm.freq(i, 0) = freq.at(i).at(0).get<double>();
    fm.freq(i, 1) = freq.at(i).at(1).get<double>();
    fm.phase(i) = phase.at(i);
  }
  return fm;
}

}  // namespace

std::string posterior_to_json(const RatioPosterior& posterior, const BayesDiceConfig& cfg,
                              const std::string& env_id, const std::string& target_id) {
  json j = {{"feature_map", feature_map_to_json(posterior.feature_map)},
            {"mu", std::vector<double>(posterior.mu.data(),
                                       posterior.mu.data() + posterior.mu.size())},
            {"log_sigma",
             std::vector<double>(posterior.log_sigma.data(),
                                 posterior.log_sigma.data() + posterior.log_sigma.size())},
            {"config",
             {{"constraint_weight", cfg.constraint_weight},
              {"norm_weight", cfg.norm_weight},
              {"prior_mu", cfg.prior_mu},
              {"prior_sigma", cfg.prior_sigma},
              {"learning_rate", cfg.learning_rate},
              {"steps", cfg.steps},
              {"batch_size", cfg.batch_size},
              {"mc_samples_per_step", cfg.mc_samples_per_step},
              {"seed", cfg.seed}}},
            {"env", env_id},
            {"target", target_id}};
  return j.dump(2);
}

RatioPosterior posterior_from_json(const std::string& text) {
  const json j = json::parse(text);
  RatioPosterior post;
  post.feature_map = feature_map_from_json(j.at("feature_map"));
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto ls = j.at("log_sigma").get<std::vector<double>>();
  if (static_cast<int>(mu.size()) != post.feature_map.dim ||
      static_cast<int>(ls.size()) != post.feature_map.dim)
    throw std::runtime_error("posterior parameter arrays do not match feature dim");
  post.mu = Eigen::Map<const Eigen::VectorXd>(mu.data(), mu.size());
  post.log_sigma = Eigen::Map<const Eigen::VectorXd>(ls.data(), ls.size());
  return post;
}

}  // namespace bdice
