#include "longmix/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "longmix/glmm_eval.hpp"
#include "longmix/stats.hpp"
#include "longmix/threading.hpp"

namespace longmix {

// ---------------------------------------------------------------------------
// Parameter layout

ParamLayout::ParamLayout(const std::vector<MarkerSpec>& markers, int K, int q)
    : K_(K), q_(q), dlen_(q * (q + 1) / 2) {
  for (int k = 0; k < K; ++k) names_.push_back("w" + std::to_string(k + 1));
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < q; ++j) {
      names_.push_back("mu" + std::to_string(k + 1) + "_" +
                       std::to_string(j + 1));
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < q; ++j) {
      for (int i = j; i < q; ++i) {
        names_.push_back("d" + std::to_string(k + 1) + "_" +
                         std::to_string(i + 1) + "_" + std::to_string(j + 1));
      }
    }
  }
  alpha_off_.assign(markers.size(), -1);
  phi_off_.assign(markers.size(), -1);
  for (std::size_t r = 0; r < markers.size(); ++r) {
    if (!markers[r].fixed.empty()) {
      alpha_off_[r] = static_cast<int>(names_.size());
      for (std::size_t c = 0; c < markers[r].fixed.size(); ++c) {
        names_.push_back("alpha_" + markers[r].name + "_" +
                         std::to_string(c + 1));
      }
    }
  }
  for (std::size_t r = 0; r < markers.size(); ++r) {
    if (markers[r].family == Family::gaussian) {
      phi_off_[r] = static_cast<int>(names_.size());
      names_.push_back("phi_" + markers[r].name);
    }
  }
  xi_off_ = static_cast<int>(names_.size());
  for (int j = 0; j < q; ++j) {
    names_.push_back("xi_" + std::to_string(j + 1));
  }
}

MixtureParams ChainSample::mixture_at(int m) const {
  Eigen::VectorXd w(K);
  std::vector<Eigen::VectorXd> mu(K);
  std::vector<SpdMatrix> d(K);
  for (int k = 0; k < K; ++k) {
    w[k] = draws(m, layout.w_index(k));
    mu[k].resize(q);
    for (int j = 0; j < q; ++j) mu[k][j] = draws(m, layout.mu_index(k, j));
    Eigen::VectorXd v(layout.vech_len());
    for (int t = 0; t < layout.vech_len(); ++t) {
      v[t] = draws(m, layout.d_index(k) + t);
    }
    d[k] = SpdMatrix::from_matrix(unvech(v));
  }
  return MixtureParams::create(std::move(w), std::move(mu), std::move(d));
}

GlmmParams ChainSample::glmm_at(int m, const ValidatedDataset& data) const {
  GlmmParams out;
  out.alpha.resize(data.n_markers());
  out.phi.assign(data.n_markers(), 1.0);
  for (int r = 0; r < data.n_markers(); ++r) {
    int p = data.p_r(r);
    out.alpha[r].resize(p);
    if (p > 0) {
      int off = layout.alpha_index(r);
      for (int c = 0; c < p; ++c) out.alpha[r][c] = draws(m, off + c);
    }
    if (data.marker(r).family == Family::gaussian) {
      out.phi[r] = draws(m, layout.phi_index(r));
    }
  }
  return out;
}

Eigen::VectorXd ChainSample::xi_scale_at(int m) const {
  Eigen::VectorXd out(q);
  for (int j = 0; j < q; ++j) out[j] = draws(m, layout.xi_index(j));
  return out;
}

// ---------------------------------------------------------------------------
// Crude estimates and k-means initialization

namespace {

// Maximize sum_j log p(y_j | eta_j = design_j . beta, phi)
//          - 0.5 (beta - center)' diag(pen) (beta - center)
// by damped Newton.  Concave in beta for the canonical links used here, so
// step halving on the objective is enough.
Eigen::VectorXd penalized_glm_fit(Family fam, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& design, double phi,
                                  const Eigen::VectorXd& center,
                                  const Eigen::VectorXd& pen, int max_iter) {
  int d = static_cast<int>(design.cols());
  Eigen::VectorXd beta = center;
  auto objective = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd eta = design * v;
    double out = 0.0;
    for (int j = 0; j < y.size(); ++j) {
      out += log_density(fam, y[j], eta[j], phi);
    }
    out -= 0.5 * (pen.array() * (v - center).array().square()).sum();
    return out;
  };
  double f = objective(beta);
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < y.size(); ++j) {
      double g1 = dlog_density(fam, y[j], eta[j], phi);
      double g2 = d2log_density(fam, y[j], eta[j], phi);
      grad += g1 * design.row(j).transpose();
      hess -= g2 * (design.row(j).transpose() * design.row(j));
    }
    grad -= (pen.array() * (beta - center).array()).matrix();
    hess += Eigen::MatrixXd(pen.asDiagonal());
    if (grad.norm() <= 1e-8) break;
    Eigen::VectorXd step = SpdMatrix::from_matrix(hess).solve(grad);
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 30; ++half) {
      Eigen::VectorXd cand = beta + scale * step;
      double f_new = objective(cand);
      if (std::isfinite(f_new) && f_new >= f - 1e-12) {
        beta = cand;
        f = f_new;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) break;
  }
  return beta;
}

struct KmeansResult {
  std::vector<int> labels;
  int k = 0;
};

KmeansResult kmeans(const Eigen::MatrixXd& points, int K, RngStream& rng) {
  int N = static_cast<int>(points.rows());
  int d = static_cast<int>(points.cols());
  Eigen::MatrixXd centers(K, d);

  // k-means++ seeding
  std::vector<double> dist2(N, std::numeric_limits<double>::infinity());
  {
    int first = static_cast<int>(rng.uniform() * N);
    if (first >= N) first = N - 1;
    centers.row(0) = points.row(first);
  }
  for (int k = 1; k < K; ++k) {
    double total = 0.0;
    for (int i = 0; i < N; ++i) {
      double dd = (points.row(i) - centers.row(k - 1)).squaredNorm();
      dist2[i] = std::min(dist2[i], dd);
      total += dist2[i];
    }
    int pick;
    if (total > 0.0) {
      pick = rng.categorical(dist2.data(), N, total);
    } else {
      pick = static_cast<int>(rng.uniform() * N);
      if (pick >= N) pick = N - 1;
    }
    centers.row(k) = points.row(pick);
  }

  std::vector<int> labels(N, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < N; ++i) {
      int best = 0;
      double best_d = (points.row(i) - centers.row(0)).squaredNorm();
      for (int k = 1; k < K; ++k) {
        double dd = (points.row(i) - centers.row(k)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = k;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    std::vector<int> counts(K, 0);
    for (int i = 0; i < N; ++i) counts[labels[i]]++;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, d);
    for (int i = 0; i < N; ++i) sums.row(labels[i]) += points.row(i);
    for (int k = 0; k < K; ++k) {
      if (counts[k] > 0) {
        centers.row(k) = sums.row(k) / counts[k];
      } else {
        // Reseed an empty cluster at the point farthest from its center.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < N; ++i) {
          double dd = (points.row(i) - centers.row(labels[i])).squaredNorm();
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        centers.row(k) = points.row(far);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return {labels, K};
}

}  // namespace

CrudeEstimates crude_random_effects(const ValidatedDataset& data,
                                    double ridge) {
  int N = data.n_subjects();
  int R = data.n_markers();
  CrudeEstimates out;
  out.b.resize(N, data.q());
  out.alpha.resize(R);
  out.phi.assign(R, 1.0);

  for (int r = 0; r < R; ++r) {
    Family fam = data.marker(r).family;
    int p = data.p_r(r);
    int qr = data.q_r(r);
    int d = qr + p;

    // Pooled fit across all subjects: columns [z | x].
    long n_total = 0;
    for (int i = 0; i < N; ++i) n_total += data.n_obs(i, r);
    Eigen::VectorXd y(n_total);
    Eigen::MatrixXd design(n_total, d);
    long row = 0;
    for (int i = 0; i < N; ++i) {
      int n = data.n_obs(i, r);
      if (n == 0) continue;
      y.segment(row, n) = data.y(i, r);
      design.block(row, 0, n, qr) = data.z(i, r);
      if (p > 0) design.block(row, qr, n, p) = data.x(i, r);
      row += n;
    }
    Eigen::VectorXd pooled(d);
    double phi = 1.0;
    if (n_total == 0) {
      pooled.setZero();
    } else {
      Eigen::VectorXd pen = Eigen::VectorXd::Constant(d, 1e-4);
      pooled = penalized_glm_fit(fam, y, design, 1.0, Eigen::VectorXd::Zero(d),
                                 pen, 50);
      if (fam == Family::gaussian) {
        Eigen::VectorXd resid = y - design * pooled;
        phi = std::max(resid.squaredNorm() / std::max<long>(n_total, 1), 1e-8);
      }
    }
    out.alpha[r] = p > 0 ? pooled.tail(p).eval() : Eigen::VectorXd(0);
    if (fam == Family::gaussian) out.phi[r] = phi;
    Eigen::VectorXd pooled_z = pooled.head(qr);

    // Per-subject fits ridged toward the pooled coefficients.
    Eigen::VectorXd pen = Eigen::VectorXd::Constant(qr, ridge);
    for (int i = 0; i < N; ++i) {
      int n = data.n_obs(i, r);
      Eigen::VectorXd v;
      if (n == 0) {
        v = pooled_z;
      } else if (fam == Family::gaussian && p > 0) {
        // The fixed part enters the identity link additively, so subtract it
        // from the response.
        Eigen::VectorXd yy = data.y(i, r) - data.x(i, r) * out.alpha[r];
        v = penalized_glm_fit(fam, yy, data.z(i, r), out.phi[r], pooled_z,
                              pen, 30);
      } else if (p > 0) {
        // No offset support in the fitter: append the fixed predictor as a
        // column pinned to coefficient 1 by a huge penalty.
        Eigen::VectorXd xa = data.x(i, r) * out.alpha[r];
        Eigen::MatrixXd dz(n, qr + 1);
        dz.leftCols(qr) = data.z(i, r);
        dz.col(qr) = xa;
        Eigen::VectorXd center(qr + 1);
        center.head(qr) = pooled_z;
        center[qr] = 1.0;
        Eigen::VectorXd pen2(qr + 1);
        pen2.head(qr).setConstant(ridge);
        pen2[qr] = 1e12;
        Eigen::VectorXd ext =
            penalized_glm_fit(fam, data.y(i, r), dz, 1.0, center, pen2, 30);
        v = ext.head(qr);
      } else {
        v = penalized_glm_fit(fam, data.y(i, r), data.z(i, r),
                              fam == Family::gaussian ? out.phi[r] : 1.0,
                              pooled_z, pen, 30);
      }
      out.b.row(i).segment(data.q_offset(r), qr) = v.transpose();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampler

GibbsSampler::GibbsSampler(const ValidatedDataset& data, int K,
                           PriorSpec prior, McmcConfig config)
    : data_(data), K_(K), prior_(std::move(prior)), config_(config) {
  if (K < 1) throw ValidationError("sampler: K must be >= 1");
  if (K > data.n_subjects()) {
    throw ValidationError("sampler: K exceeds the number of subjects");
  }
  if (config_.keep < 1 || config_.thin < 1 || config_.burnin < 0) {
    throw ValidationError("sampler: keep >= 1, thin >= 1, burnin >= 0");
  }
  if (prior_.xi.size() != data.q() || prior_.c_diag.size() != data.q() ||
      prior_.h_rate.size() != data.q()) {
    throw ValidationError("sampler: prior dimensions do not match q");
  }
  layout_ = ParamLayout(data.raw().markers, K, data.q());
}

ChainState GibbsSampler::initial_state() const {
  int N = data_.n_subjects();
  int q = data_.q();
  int R = data_.n_markers();

  CrudeEstimates crude = crude_random_effects(data_);

  ChainState s;
  s.b = crude.b;
  s.glmm.alpha = crude.alpha;
  s.glmm.phi = crude.phi;

  // Cluster the standardized crude estimates to seed allocations.
  Eigen::MatrixXd std_b = crude.b;
  for (int j = 0; j < q; ++j) {
    double mean = std_b.col(j).mean();
    double sd = std::sqrt(
        (std_b.col(j).array() - mean).square().sum() / std::max(N - 1, 1));
    if (!(sd > 1e-12)) sd = 1.0;
    std_b.col(j) = (std_b.col(j).array() - mean) / sd;
  }
  RngStream rng(config_.seed, rngtag::kInit, 1, 0);
  KmeansResult km = kmeans(std_b, K_, rng);
  s.u = km.labels;

  std::vector<int> counts(K_, 0);
  for (int i = 0; i < N; ++i) counts[s.u[i]]++;

  Eigen::VectorXd w(K_);
  double floor_w = static_cast<double>(N) / (10.0 * K_);
  for (int k = 0; k < K_; ++k) {
    w[k] = std::max<double>(counts[k], floor_w);
  }
  w /= w.sum();

  Eigen::VectorXd overall_mean = crude.b.colwise().mean();
  std::vector<Eigen::VectorXd> mu(K_, overall_mean);
  for (int k = 0; k < K_; ++k) {
    if (counts[k] > 0) {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(q);
      for (int i = 0; i < N; ++i) {
        if (s.u[i] == k) m += crude.b.row(i).transpose();
      }
      mu[k] = m / counts[k];
    }
  }
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd dev = crude.b.row(i).transpose() - mu[s.u[i]];
    pooled += dev * dev.transpose();
  }
  pooled /= std::max(N - K_, 1);
  double ridge = 1e-6 * pooled.trace() / q + 1e-12;
  pooled.diagonal().array() += ridge;
  SpdMatrix d0 = SpdMatrix::from_matrix(pooled);
  s.mixture = MixtureParams::create(
      w, std::move(mu), std::vector<SpdMatrix>(K_, d0));

  s.xi_scale = (prior_.g_shape / prior_.h_rate.array()).matrix();

  s.log_step_b = Eigen::VectorXd::Constant(N, std::log(2.38 / std::sqrt(q)));
  s.prop_chol_b.assign(N, Eigen::MatrixXd::Identity(q, q));
  s.log_step_alpha.assign(R, 0.0);
  s.prop_chol_alpha.assign(R, Eigen::MatrixXd());
  for (int r = 0; r < R; ++r) {
    int p = data_.p_r(r);
    if (p > 0 && data_.marker(r).family != Family::gaussian) {
      s.log_step_alpha[r] = std::log(2.38 / std::sqrt(p));
      s.prop_chol_alpha[r] = Eigen::MatrixXd::Identity(p, p);
    }
  }
  s.win_acc_b = Eigen::ArrayXd::Zero(N);
  s.win_try_b = Eigen::ArrayXd::Zero(N);
  s.run_acc_b = Eigen::ArrayXd::Zero(N);
  s.run_try_b = Eigen::ArrayXd::Zero(N);
  s.win_acc_alpha.assign(R, 0.0);
  s.win_try_alpha.assign(R, 0.0);
  s.run_acc_alpha.assign(R, 0.0);
  s.run_try_alpha.assign(R, 0.0);

  ChainState st = std::move(s);
  refresh_proposal_shapes(st);
  return st;
}

void GibbsSampler::refresh_proposal_shapes(ChainState& s) const {
  int N = data_.n_subjects();
  int q = data_.q();
  for (int i = 0; i < N; ++i) {
    if (data_.subject_all_gaussian(i) || config_.prior_only) continue;
    Eigen::VectorXd grad(q);
    Eigen::MatrixXd nh(q, q);
    subject_loglik_grad_neghess(data_, i, s.glmm, s.b.row(i).transpose(),
                                &grad, &nh);
    nh += s.mixture.d[s.u[i]].inverse();
    // Proposal covariance = inverse of the local curvature.
    SpdMatrix curv = SpdMatrix::from_matrix(nh);
    s.prop_chol_b[i] = SpdMatrix::from_matrix(curv.inverse()).chol_lower();
  }
  for (int r = 0; r < data_.n_markers(); ++r) {
    int p = data_.p_r(r);
    if (p == 0 || data_.marker(r).family == Family::gaussian ||
        config_.prior_only) {
      continue;
    }
    Eigen::VectorXd grad(p);
    Eigen::MatrixXd nh(p, p);
    marker_loglik_alpha_grad_neghess(data_, r, s.glmm.alpha[r], s.b,
                                     s.glmm.phi[r], &grad, &nh);
    nh.diagonal().array() += 1.0 / prior_.alpha_var;
    SpdMatrix curv = SpdMatrix::from_matrix(nh);
    s.prop_chol_alpha[r] =
        SpdMatrix::from_matrix(curv.inverse()).chol_lower();
  }
}

void GibbsSampler::update_allocations(ChainState& s, long sweep) const {
  int N = data_.n_subjects();
  int K = K_;
  const MixtureParams& mix = s.mixture;
  parallel_for(N, [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd logp(K);
    std::vector<double> wts(K);
    for (std::size_t i = begin; i < end; ++i) {
      Eigen::VectorXd b = s.b.row(static_cast<int>(i)).transpose();
      for (int k = 0; k < K; ++k) {
        logp[k] = mix.w[k] > 0.0
                      ? std::log(mix.w[k]) + log_mvn_pdf(b, mix.mu[k], mix.d[k])
                      : -std::numeric_limits<double>::infinity();
      }
      double m = logp.maxCoeff();
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        wts[k] = std::isfinite(m) ? std::exp(logp[k] - m) : mix.w[k];
        total += wts[k];
      }
      RngStream rng(config_.seed, rngtag::kAlloc, static_cast<std::uint32_t>(i),
                    static_cast<std::uint32_t>(sweep));
      s.u[i] = rng.categorical(wts.data(), K, total);
    }
  });
}

void GibbsSampler::update_weights(ChainState& s, long sweep) const {
  Eigen::VectorXd conc = Eigen::VectorXd::Constant(K_, prior_.delta);
  for (int i = 0; i < data_.n_subjects(); ++i) conc[s.u[i]] += 1.0;
  RngStream rng(config_.seed, rngtag::kWeights, 0,
                static_cast<std::uint32_t>(sweep));
  s.mixture.w = draw_dirichlet(rng, conc);
}

void GibbsSampler::update_means_covariances(ChainState& s, long sweep) const {
  int N = data_.n_subjects();
  int q = data_.q();
  Eigen::VectorXd c_inv = prior_.c_diag.cwiseInverse();
  SpdMatrix xi_mat = SpdMatrix::diagonal(s.xi_scale);

  for (int k = 0; k < K_; ++k) {
    RngStream rng(config_.seed, rngtag::kMixture,
                  static_cast<std::uint32_t>(k),
                  static_cast<std::uint32_t>(sweep));
    int n_k = 0;
    Eigen::VectorXd sum_b = Eigen::VectorXd::Zero(q);
    for (int i = 0; i < N; ++i) {
      if (s.u[i] == k) {
        ++n_k;
        sum_b += s.b.row(i).transpose();
      }
    }
    Eigen::MatrixXd d_inv = s.mixture.d[k].inverse();

    // mu_k | rest
    Eigen::MatrixXd prec = n_k * d_inv;
    prec.diagonal() += c_inv;
    Eigen::VectorXd rhs =
        d_inv * sum_b + (c_inv.array() * prior_.xi.array()).matrix();
    SpdMatrix prec_spd = SpdMatrix::from_matrix(prec);
    Eigen::VectorXd mean = prec_spd.solve(rhs);
    s.mixture.mu[k] = draw_mvn_prec(rng, mean, prec_spd.chol_lower());

    // D_k | rest via its precision
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < N; ++i) {
      if (s.u[i] == k) {
        Eigen::VectorXd dev = s.b.row(i).transpose() - s.mixture.mu[k];
        scatter += dev * dev.transpose();
      }
    }
    Eigen::MatrixXd rate = xi_mat.mat() + scatter;
    SpdMatrix rate_spd = SpdMatrix::from_matrix(rate);
    SpdMatrix wish_scale = SpdMatrix::from_matrix(rate_spd.inverse());
    Eigen::MatrixXd prec_draw =
        draw_wishart(rng, prior_.zeta + n_k, wish_scale);
    SpdMatrix prec_draw_spd = SpdMatrix::from_matrix(prec_draw);
    s.mixture.d[k] = SpdMatrix::from_matrix(prec_draw_spd.inverse());
  }
}

void GibbsSampler::update_hyper_scale(ChainState& s, long sweep) const {
  int q = data_.q();
  RngStream rng(config_.seed, rngtag::kHyper, 0,
                static_cast<std::uint32_t>(sweep));
  Eigen::VectorXd prec_diag_sum = Eigen::VectorXd::Zero(q);
  for (int k = 0; k < K_; ++k) {
    prec_diag_sum += s.mixture.d[k].inverse().diagonal();
  }
  double shape = prior_.g_shape + 0.5 * K_ * prior_.zeta;
  for (int j = 0; j < q; ++j) {
    double rate = prior_.h_rate[j] + 0.5 * prec_diag_sum[j];
    s.xi_scale[j] = rng.gamma(shape, rate);
  }
}

void GibbsSampler::rescale_covariances(ChainState& s, long sweep) const {
  // For component k and dimension j propose, with c = exp(eps),
  //   b_ij' = mu_kj + c (b_ij - mu_kj)  for members i,   D_k' = S D_k S,
  // where S = diag(1, .., c at j, .., 1).  The mixture density ratio c^{-n_k}
  // cancels the b Jacobian and the D Jacobian c^{q+1} folds into the inverse
  // Wishart ratio, leaving
  //   log alpha = dloglik_y - zeta eps - xi_j (D_k^{-1})_jj (c^{-2} - 1) / 2,
  // with dloglik_y over the members' observations of the marker owning j.
  // The prior part is balanced at equilibrium, so healthy dimensions are
  // barely perturbed while a collapsed one accepts expansions until the
  // likelihood pushes back.
  const double tau = 0.3;
  int N = data_.n_subjects();
  int q = data_.q();
  for (int k = 0; k < K_; ++k) {
    RngStream rng(config_.seed, rngtag::kRescale,
                  static_cast<std::uint32_t>(k),
                  static_cast<std::uint32_t>(sweep));
    std::vector<int> members;
    for (int i = 0; i < N; ++i) {
      if (s.u[i] == k) members.push_back(i);
    }
    Eigen::MatrixXd d_inv = s.mixture.d[k].inverse();
    for (int j = 0, r = 0; j < q; ++j) {
      while (j >= data_.q_offset(r) + data_.q_r(r)) ++r;
      double eps = tau * rng.normal();
      double c = std::exp(eps);
      double mu_j = s.mixture.mu[k][j];
      double log_acc = -prior_.zeta * eps -
                       0.5 * s.xi_scale[j] * d_inv(j, j) *
                           (1.0 / (c * c) - 1.0);
      if (!config_.prior_only) {
        Family fam = data_.marker(r).family;
        double phi = s.glmm.phi[r];
        int off = data_.q_offset(r);
        int qr = data_.q_r(r);
        for (int i : members) {
          double db = (c - 1.0) * (s.b(i, j) - mu_j);
          int n = data_.n_obs(i, r);
          if (n == 0 || db == 0.0) continue;
          const Eigen::MatrixXd& z = data_.z(i, r);
          const Eigen::VectorXd& y = data_.y(i, r);
          Eigen::VectorXd eta = z * s.b.row(i).segment(off, qr).transpose();
          if (s.glmm.alpha[r].size() > 0) {
            eta += data_.x(i, r) * s.glmm.alpha[r];
          }
          for (int t = 0; t < n; ++t) {
            double shift = z(t, j - off) * db;
            if (shift == 0.0) continue;
            log_acc += log_density(fam, y[t], eta[t] + shift, phi) -
                       log_density(fam, y[t], eta[t], phi);
          }
        }
      }
      if (std::log(rng.uniform()) < log_acc) {
        for (int i : members) {
          s.b(i, j) = mu_j + c * (s.b(i, j) - mu_j);
        }
        Eigen::MatrixXd d_new = s.mixture.d[k].mat();
        d_new.row(j) *= c;
        d_new.col(j) *= c;
        s.mixture.d[k] = SpdMatrix::from_matrix(d_new);
        d_inv.row(j) /= c;
        d_inv.col(j) /= c;
      }
    }
  }
}

void GibbsSampler::update_random_effects(ChainState& s, long sweep,
                                         bool adapting) const {
  int N = data_.n_subjects();
  int q = data_.q();
  parallel_for(N, [&](std::size_t begin, std::size_t end) {
    for (std::size_t ii = begin; ii < end; ++ii) {
      int i = static_cast<int>(ii);
      RngStream rng(config_.seed, rngtag::kRanef,
                    static_cast<std::uint32_t>(i),
                    static_cast<std::uint32_t>(sweep));
      int k = s.u[i];
      const Eigen::VectorXd& mu = s.mixture.mu[k];
      const SpdMatrix& d = s.mixture.d[k];

      if (config_.prior_only) {
        s.b.row(i) = draw_mvn(rng, mu, d.chol_lower()).transpose();
        continue;
      }

      if (data_.subject_all_gaussian(i)) {
        // Fully conjugate: precision D^{-1} + sum_r Z'Z / phi_r.
        Eigen::MatrixXd prec = d.inverse();
        Eigen::VectorXd rhs = prec * mu;
        for (int r = 0; r < data_.n_markers(); ++r) {
          int n = data_.n_obs(i, r);
          if (n == 0) continue;
          const Eigen::MatrixXd& z = data_.z(i, r);
          double phi = s.glmm.phi[r];
          Eigen::VectorXd resid = data_.y(i, r);
          if (s.glmm.alpha[r].size() > 0) {
            resid -= data_.x(i, r) * s.glmm.alpha[r];
          }
          int off = data_.q_offset(r);
          int qr = data_.q_r(r);
          prec.block(off, off, qr, qr) += z.transpose() * z / phi;
          rhs.segment(off, qr) += z.transpose() * resid / phi;
        }
        SpdMatrix prec_spd = SpdMatrix::from_matrix(prec);
        Eigen::VectorXd mean = prec_spd.solve(rhs);
        s.b.row(i) =
            draw_mvn_prec(rng, mean, prec_spd.chol_lower()).transpose();
        continue;
      }

      // Joint random-walk MH with the precomputed proposal shape.
      Eigen::VectorXd cur = s.b.row(i).transpose();
      Eigen::VectorXd z(q);
      for (int j = 0; j < q; ++j) z[j] = rng.normal();
      double step = std::exp(s.log_step_b[i]);
      Eigen::VectorXd dir = s.prop_chol_b[i].triangularView<Eigen::Lower>() * z;
      Eigen::VectorXd prop = cur + step * dir;
      double cur_target =
          subject_loglik(data_, i, s.glmm, cur) + log_mvn_pdf(cur, mu, d);
      double prop_target =
          subject_loglik(data_, i, s.glmm, prop) + log_mvn_pdf(prop, mu, d);
      double u = rng.uniform();
      bool accept = std::log(u) < prop_target - cur_target;
      if (accept) s.b.row(i) = prop.transpose();
      if (adapting) {
        s.win_try_b[i] += 1.0;
        if (accept) s.win_acc_b[i] += 1.0;
      }
      s.run_try_b[i] += 1.0;
      if (accept) s.run_acc_b[i] += 1.0;
    }
  });
}

void GibbsSampler::update_glmm_params(ChainState& s, long sweep,
                                      bool adapting) const {
  for (int r = 0; r < data_.n_markers(); ++r) {
    Family fam = data_.marker(r).family;
    int p = data_.p_r(r);
    bool gaussian = fam == Family::gaussian;
    if (p == 0 && !gaussian) continue;
    RngStream rng(config_.seed, rngtag::kGlmm, static_cast<std::uint32_t>(r),
                  static_cast<std::uint32_t>(sweep));

    if (config_.prior_only) {
      if (p > 0) {
        double sd = std::sqrt(prior_.alpha_var);
        for (int c = 0; c < p; ++c) s.glmm.alpha[r][c] = sd * rng.normal();
      }
      if (gaussian) {
        s.glmm.phi[r] = 1.0 / rng.gamma(prior_.phi_shape, prior_.phi_rate);
      }
      continue;
    }

    if (gaussian) {
      int off = data_.q_offset(r);
      int qr = data_.q_r(r);
      if (p > 0) {
        // Conjugate normal update for alpha_r.
        Eigen::MatrixXd prec =
            Eigen::MatrixXd::Identity(p, p) / prior_.alpha_var;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
        double phi = s.glmm.phi[r];
        for (int i = 0; i < data_.n_subjects(); ++i) {
          int n = data_.n_obs(i, r);
          if (n == 0) continue;
          const Eigen::MatrixXd& x = data_.x(i, r);
          Eigen::VectorXd e =
              data_.y(i, r) -
              data_.z(i, r) * s.b.row(i).segment(off, qr).transpose();
          prec += x.transpose() * x / phi;
          rhs += x.transpose() * e / phi;
        }
        SpdMatrix prec_spd = SpdMatrix::from_matrix(prec);
        Eigen::VectorXd mean = prec_spd.solve(rhs);
        s.glmm.alpha[r] = draw_mvn_prec(rng, mean, prec_spd.chol_lower());
      }
      // Conjugate inverse-gamma update for phi_r.
      double rss = 0.0;
      long n_r = 0;
      for (int i = 0; i < data_.n_subjects(); ++i) {
        int n = data_.n_obs(i, r);
        if (n == 0) continue;
        Eigen::VectorXd e =
            data_.y(i, r) -
            data_.z(i, r) * s.b.row(i).segment(off, qr).transpose();
        if (p > 0) e -= data_.x(i, r) * s.glmm.alpha[r];
        rss += e.squaredNorm();
        n_r += n;
      }
      double shape = prior_.phi_shape + 0.5 * n_r;
      double rate = prior_.phi_rate + 0.5 * rss;
      s.glmm.phi[r] = 1.0 / rng.gamma(shape, rate);
      continue;
    }

    // Non-gaussian marker with fixed effects: random-walk MH on alpha_r.
    Eigen::VectorXd cur = s.glmm.alpha[r];
    Eigen::VectorXd z(p);
    for (int c = 0; c < p; ++c) z[c] = rng.normal();
    double step = std::exp(s.log_step_alpha[r]);
    Eigen::VectorXd dir =
        s.prop_chol_alpha[r].triangularView<Eigen::Lower>() * z;
    Eigen::VectorXd prop = cur + step * dir;
    auto alpha_target = [&](const Eigen::VectorXd& a) {
      double t = marker_loglik_alpha(data_, r, a, s.b, 1.0);
      for (int c = 0; c < p; ++c) {
        t += log_normal_pdf(a[c], 0.0, prior_.alpha_var);
      }
      return t;
    };
    double delta = alpha_target(prop) - alpha_target(cur);
    double u = rng.uniform();
    bool accept = std::log(u) < delta;
    if (accept) s.glmm.alpha[r] = prop;
    if (adapting) {
      s.win_try_alpha[r] += 1.0;
      if (accept) s.win_acc_alpha[r] += 1.0;
    }
    s.run_try_alpha[r] += 1.0;
    if (accept) s.run_acc_alpha[r] += 1.0;
  }
}

void GibbsSampler::adapt_scales(ChainState& s, long window_index) const {
  double gain = 1.0 / std::sqrt(static_cast<double>(window_index) + 1.0);
  double target_b = data_.q() == 1 ? 0.44 : 0.234;
  for (int i = 0; i < data_.n_subjects(); ++i) {
    if (s.win_try_b[i] > 0.0) {
      double rate = s.win_acc_b[i] / s.win_try_b[i];
      s.log_step_b[i] += gain * (rate - target_b);
      s.log_step_b[i] = std::clamp(s.log_step_b[i], std::log(1e-4),
                                   std::log(1e4));
    }
  }
  s.win_acc_b.setZero();
  s.win_try_b.setZero();
  for (int r = 0; r < data_.n_markers(); ++r) {
    if (s.win_try_alpha[r] > 0.0) {
      double target = data_.p_r(r) == 1 ? 0.44 : 0.234;
      double rate = s.win_acc_alpha[r] / s.win_try_alpha[r];
      s.log_step_alpha[r] += gain * (rate - target);
      s.log_step_alpha[r] = std::clamp(s.log_step_alpha[r], std::log(1e-4),
                                       std::log(1e4));
    }
    s.win_acc_alpha[r] = 0.0;
    s.win_try_alpha[r] = 0.0;
  }
  refresh_proposal_shapes(s);
}

void GibbsSampler::one_sweep(ChainState& s, long sweep, bool adapting) const {
  const char* block = "allocations";
  try {
    update_allocations(s, sweep);
    block = "weights";
    update_weights(s, sweep);
    block = "means_covariances";
    update_means_covariances(s, sweep);
    block = "hyper_scale";
    update_hyper_scale(s, sweep);
    block = "covariance_rescaling";
    rescale_covariances(s, sweep);
    block = "random_effects";
    update_random_effects(s, sweep, adapting);
    block = "glmm_params";
    update_glmm_params(s, sweep, adapting);
  } catch (const std::exception& e) {
    std::ostringstream msg;
    msg << "sweep " << sweep << ", block " << block << ": " << e.what();
    msg << "\nstate: w = [" << s.mixture.w.transpose() << "]";
    for (int k = 0; k < K_; ++k) {
      msg << "\n  mu_" << (k + 1) << " = [" << s.mixture.mu[k].transpose()
          << "], log|D_" << (k + 1) << "| = " << s.mixture.d[k].log_det();
    }
    msg << "\n  xi_scale = [" << s.xi_scale.transpose() << "]";
    for (int r = 0; r < data_.n_markers(); ++r) {
      msg << "\n  alpha_" << data_.marker(r).name << " = ["
          << s.glmm.alpha[r].transpose() << "], phi = " << s.glmm.phi[r];
    }
    throw NumericalError(msg.str());
  }

  // Cheap invariants after every sweep.
  double wsum = s.mixture.w.sum();
  if (std::abs(wsum - 1.0) > 1e-9 || !s.b.allFinite() ||
      !s.xi_scale.allFinite() || (s.xi_scale.array() <= 0.0).any()) {
    std::ostringstream msg;
    msg << "sweep " << sweep << ": state invariant violated (sum w = " << wsum
        << ")";
    throw NumericalError(msg.str());
  }
  for (int r = 0; r < data_.n_markers(); ++r) {
    if (!(s.glmm.phi[r] > 0.0) || !std::isfinite(s.glmm.phi[r])) {
      throw NumericalError("sweep " + std::to_string(sweep) +
                           ": non-positive dispersion");
    }
  }
}

void GibbsSampler::store_draw(ChainSample& out, const ChainState& s,
                              int m) const {
  int q = data_.q();
  Eigen::RowVectorXd row(layout_.size());
  for (int k = 0; k < K_; ++k) row[layout_.w_index(k)] = s.mixture.w[k];
  for (int k = 0; k < K_; ++k) {
    for (int j = 0; j < q; ++j) {
      row[layout_.mu_index(k, j)] = s.mixture.mu[k][j];
    }
    Eigen::VectorXd v = vech(s.mixture.d[k].mat());
    for (int t = 0; t < layout_.vech_len(); ++t) {
      row[layout_.d_index(k) + t] = v[t];
    }
  }
  for (int r = 0; r < data_.n_markers(); ++r) {
    int p = data_.p_r(r);
    if (p > 0) {
      for (int c = 0; c < p; ++c) {
        row[layout_.alpha_index(r) + c] = s.glmm.alpha[r][c];
      }
    }
    if (data_.marker(r).family == Family::gaussian) {
      row[layout_.phi_index(r)] = s.glmm.phi[r];
    }
  }
  for (int j = 0; j < q; ++j) row[layout_.xi_index(j)] = s.xi_scale[j];
  out.draws.row(m) = row;

  for (int i = 0; i < data_.n_subjects(); ++i) {
    Eigen::VectorXd probs =
        conditional_allocation_probs(s.b.row(i).transpose(), s.mixture);
    for (int k = 0; k < K_; ++k) out.allocprobs.at(i, k, m) = probs[k];
  }
  if (config_.store_random_effects) out.b_draws[m] = s.b;
}

ChainSample GibbsSampler::run() const {
  int N = data_.n_subjects();
  ChainState s = initial_state();

  ChainSample out;
  out.layout = layout_;
  out.draws.resize(config_.keep, layout_.size());
  out.allocprobs = AllocProbs(N, K_, config_.keep);
  if (config_.store_random_effects) out.b_draws.resize(config_.keep);
  out.config = config_;
  out.prior = prior_;
  out.K = K_;
  out.q = data_.q();
  out.N = N;

  long raw_burn = static_cast<long>(config_.burnin) * config_.thin;
  long raw_total = raw_burn + static_cast<long>(config_.keep) * config_.thin;
  long window = 0;
  int m = 0;
  for (long sweep = 0; sweep < raw_total; ++sweep) {
    bool in_burn = sweep < raw_burn;
    bool adapting = config_.adapt && in_burn;
    one_sweep(s, sweep, adapting);
    if (adapting && (sweep + 1) % adapt_window_ == 0) {
      adapt_scales(s, window++);
    }
    if (sweep + 1 == raw_burn) {
      s.run_acc_b.setZero();
      s.run_try_b.setZero();
      std::fill(s.run_acc_alpha.begin(), s.run_acc_alpha.end(), 0.0);
      std::fill(s.run_try_alpha.begin(), s.run_try_alpha.end(), 0.0);
    }
    if (!in_burn && (sweep + 1 - raw_burn) % config_.thin == 0) {
      store_draw(out, s, m++);
    }
  }

  double total_try = s.run_try_b.sum();
  out.acceptance.random_effects =
      total_try > 0.0 ? s.run_acc_b.sum() / total_try : 1.0;
  out.acceptance.alpha.assign(data_.n_markers(), 1.0);
  for (int r = 0; r < data_.n_markers(); ++r) {
    if (s.run_try_alpha[r] > 0.0) {
      out.acceptance.alpha[r] = s.run_acc_alpha[r] / s.run_try_alpha[r];
    }
  }
  return out;
}

ChainSample run_chain(const ValidatedDataset& data, int K,
                      const PriorSpec& prior, const McmcConfig& config) {
  set_max_threads(config.threads);
  GibbsSampler sampler(data, K, prior, config);
  return sampler.run();
}

}  // namespace longmix
