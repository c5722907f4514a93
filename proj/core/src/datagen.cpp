#include "policylearn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "policylearn/errors.hpp"
#include "policylearn/rng.hpp"

namespace policylearn {

std::string to_string(AdherenceMode m) {
  switch (m) {
    case AdherenceMode::AlwaysFull: return "always-full";
    case AdherenceMode::Mixture: return "mixture";
    case AdherenceMode::PeriodicEndogenous: return "periodic-endogenous";
  }
  return "always-full";
}

AdherenceMode adherence_mode_from_string(const std::string& s) {
  if (s == "always-full") return AdherenceMode::AlwaysFull;
  if (s == "mixture") return AdherenceMode::Mixture;
  if (s == "periodic-endogenous") return AdherenceMode::PeriodicEndogenous;
  throw ValidationError("unknown adherence_mode: " + s);
}

void DgpConfig::validate() const {
  if (n_obs < 1) throw ValidationError("dgp: n_obs must be >= 1");
  if (n_groups < 1) throw ValidationError("dgp: n_groups must be >= 1");
  if (n_covariates < 1) throw ValidationError("dgp: n_covariates must be >= 1");
  if (n_treatments < 0) throw ValidationError("dgp: n_treatments must be >= 0");
  const auto S = static_cast<std::size_t>(n_groups);
  const auto D = static_cast<std::size_t>(n_treatments);

  if (group_shares.size() != S) throw ValidationError("dgp: group_shares length != S");
  double sum = 0.0;
  for (double s : group_shares) {
    if (!(s > 0.0)) throw ValidationError("dgp: every group share must be > 0");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("dgp: group_shares must sum to 1");

  if (group_means.size() != S) throw ValidationError("dgp: group_means length != S");
  for (const auto& mu : group_means)
    if (mu.size() != n_covariates) throw ValidationError("dgp: group mean length != p");

  if (group_covs.size() != S) throw ValidationError("dgp: group_covs length != S");
  for (const auto& cov : group_covs) {
    if (cov.dim() != n_covariates) throw ValidationError("dgp: group cov dimension != p");
    try {
      cholesky(cov);
    } catch (const NotPositiveDefinite&) {
      throw ValidationError("dgp: group covariance is not positive-definite");
    }
  }

  if (intercepts.size() != S) throw ValidationError("dgp: intercepts length != S");
  if (effect_matrix.rows() != D || (D > 0 && effect_matrix.cols() != S))
    throw ValidationError("dgp: effect_matrix must be D x S");
  for (std::size_t g = 0; g < S; ++g) {
    const double b0 = intercepts[g];
    if (b0 < 0.0 || b0 > 1.0) throw ValidationError("dgp: intercept outside [0,1]");
    for (std::size_t d = 0; d < D; ++d) {
      const double pr = b0 + effect_matrix(d, g);
      if (pr < 0.0 || pr > 1.0)
        throw ValidationError("dgp: beta0 + tau outside [0,1] for treatment " +
                              std::to_string(d + 1) + ", group " + std::to_string(g + 1));
    }
  }

  if (propensities.size() != S) throw ValidationError("dgp: propensities length != S");
  for (const auto& pr : propensities) {
    if (pr.size() != D + 1) throw ValidationError("dgp: propensity vector length != D+1");
    double psum = 0.0;
    for (double v : pr) {
      if (!(v > 0.0)) throw ValidationError("dgp: propensity entries must be > 0 (overlap)");
      psum += v;
    }
    if (std::abs(psum - 1.0) > 1e-9) throw ValidationError("dgp: propensity vector must sum to 1");
  }

  if (noise_sd.size() != S) throw ValidationError("dgp: noise_sd length != S");
  for (double v : noise_sd)
    if (v < 0.0) throw ValidationError("dgp: noise_sd must be >= 0");

  if (missing_rate < 0.0 || missing_rate >= 1.0)
    throw ValidationError("dgp: missing_rate must lie in [0,1)");

  if (adherence_mode == AdherenceMode::Mixture) {
    if (mixture.full_prob < 0.0 || mixture.full_prob > 1.0)
      throw ValidationError("dgp: mixture full_prob outside [0,1]");
    if (mixture.partial_lo < 0.0 || mixture.partial_hi > 1.0 ||
        mixture.partial_lo > mixture.partial_hi)
      throw ValidationError("dgp: mixture partial range invalid");
  }
  if (adherence_mode == AdherenceMode::PeriodicEndogenous) {
    if (periodic.n_periods < 1) throw ValidationError("dgp: periodic n_periods must be >= 1");
    if (!(periodic.anticipation_sd0 > 0.0) || !(periodic.anticipation_decay > 0.0) ||
        periodic.anticipation_decay >= 1.0)
      throw ValidationError("dgp: periodic anticipation sds must be positive and decreasing");
  }
}

PeriodicAdherenceResult generate_periodic_adherence(const Matrix& w_schedule,
                                                    const Vector& zeta, double xi,
                                                    const Vector& anticipation_sds,
                                                    double outcome_noise, double effect,
                                                    std::uint64_t seed) {
  const std::size_t T1 = w_schedule.rows();
  if (T1 == 0) throw ValidationError("periodic adherence: empty schedule");
  if (w_schedule.cols() != zeta.size())
    throw ValidationError("periodic adherence: zeta length != schedule columns");
  if (anticipation_sds.size() != T1)
    throw ValidationError("periodic adherence: anticipation_sds length != T+1");
  for (std::size_t t = 0; t + 1 < T1; ++t) {
    if (!(anticipation_sds[t] > anticipation_sds[t + 1]) || !(anticipation_sds[t + 1] > 0.0))
      throw ValidationError("periodic adherence: anticipation_sds must be strictly decreasing and positive");
  }

  Rng rng = make_rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  Vector base(T1);  // W_it * zeta, fixed over passes
  for (std::size_t t = 0; t < T1; ++t) {
    double b = 0.0;
    for (std::size_t k = 0; k < zeta.size(); ++k) b += w_schedule(t, k) * zeta[k];
    base[t] = b;
  }
  Vector shock(T1), anticipation(T1);
  for (std::size_t t = 0; t < T1; ++t) shock[t] = std_normal(rng);
  for (std::size_t t = 0; t < T1; ++t) anticipation[t] = anticipation_sds[t] * std_normal(rng);

  const auto realized = [&](double a_feedback) {
    const double y = effect * a_feedback + outcome_noise;
    int taken = 0;
    for (std::size_t t = 0; t < T1; ++t)
      if (base[t] + (y + anticipation[t]) * xi + shock[t] > 0.0) ++taken;
    return static_cast<double>(taken) / static_cast<double>(T1);
  };

  double a_eff = 1.0;  // anticipations start from complete remaining adherence
  const int max_passes = 100;
  for (int pass = 1; pass <= max_passes; ++pass) {
    const double a_raw = realized(a_eff);
    if (realized(a_raw) == a_raw)
      return PeriodicAdherenceResult{a_raw, true, pass};
    a_eff = 0.5 * a_eff + 0.5 * a_raw;
  }
  return PeriodicAdherenceResult{realized(a_eff), false, max_passes};
}

namespace {

int draw_categorical(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

Cohort generate_cohort(const DgpConfig& config) {
  config.validate();
  const std::size_t n = config.n_obs;
  const std::size_t p = config.n_covariates;
  const int S = config.n_groups;
  const int D = config.n_treatments;

  std::vector<SpdFactor> factors;
  factors.reserve(static_cast<std::size_t>(S));
  for (const auto& cov : config.group_covs) factors.push_back(cholesky(cov));

  Cohort cohort;
  cohort.covariates = Matrix(n, p);
  cohort.assigned.resize(n);
  cohort.adherence.assign(n, 0.0);
  cohort.outcome.resize(n);
  cohort.true_group.resize(n);
  cohort.n_treatments = D;

  Rng rng = make_rng(config.seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const auto& per = config.periodic;
  Matrix w_schedule(static_cast<std::size_t>(per.n_periods), 1, per.w_intercept);
  Vector zeta{1.0};
  Vector ant_sds(static_cast<std::size_t>(per.n_periods));
  for (int t = 0; t < per.n_periods; ++t)
    ant_sds[static_cast<std::size_t>(t)] = per.anticipation_sd0 * std::pow(per.anticipation_decay, t);

  for (std::size_t i = 0; i < n; ++i) {
    const int g = draw_categorical(config.group_shares, rng);
    cohort.true_group[i] = g + 1;

    const auto& mu = config.group_means[static_cast<std::size_t>(g)];
    const auto& L = factors[static_cast<std::size_t>(g)].L;
    Vector z(p);
    for (std::size_t k = 0; k < p; ++k) z[k] = std_normal(rng);
    for (std::size_t r = 0; r < p; ++r) {
      double v = mu[r];
      for (std::size_t k = 0; k <= r; ++k) v += L(r, k) * z[k];
      cohort.covariates(i, r) = v;
    }

    const int d = draw_categorical(config.propensities[static_cast<std::size_t>(g)], rng);
    cohort.assigned[i] = d;

    const double beta0 = config.intercepts[static_cast<std::size_t>(g)];
    const double tau = (d == 0) ? 0.0 : config.effect_matrix(static_cast<std::size_t>(d - 1),
                                                             static_cast<std::size_t>(g));
    double a = 0.0;
    double latent_noise = 0.0;
    if (d != 0) {
      switch (config.adherence_mode) {
        case AdherenceMode::AlwaysFull:
          a = 1.0;
          break;
        case AdherenceMode::Mixture: {
          if (unif(rng) < config.mixture.full_prob) {
            a = 1.0;
          } else {
            a = config.mixture.partial_lo +
                (config.mixture.partial_hi - config.mixture.partial_lo) * unif(rng);
          }
          break;
        }
        case AdherenceMode::PeriodicEndogenous: {
          const double sd = config.noise_sd[static_cast<std::size_t>(g)];
          const int max_resamples = 100;
          PeriodicAdherenceResult res;
          for (int attempt = 0; attempt < max_resamples; ++attempt) {
            latent_noise = sd * std_normal(rng);
            res = generate_periodic_adherence(w_schedule, zeta, per.xi, ant_sds,
                                              beta0 + latent_noise, tau, rng());
            if (res.converged) break;
          }
          if (!res.converged)
            throw NumericError("dgp: periodic adherence failed to converge after resampling");
          a = res.adherence;
          break;
        }
      }
    }
    cohort.adherence[i] = a;

    const double mean = beta0 + tau * a;
    if (config.outcome_mode == OutcomeMode::Bernoulli) {
      if (mean < -1e-12 || mean > 1.0 + 1e-12)
        throw ValidationError("dgp: realized outcome probability outside [0,1]");
      cohort.outcome[i] = unif(rng) < mean ? 1 : 0;
    } else {
      double noise = latent_noise;
      if (config.adherence_mode != AdherenceMode::PeriodicEndogenous)
        noise = config.noise_sd[static_cast<std::size_t>(g)] * std_normal(rng);
      const double pr = std::clamp(mean + noise, 0.0, 1.0);
      cohort.outcome[i] = unif(rng) < pr ? 1 : 0;
    }
  }

  if (config.missing_rate > 0.0)
    return inject_missing(cohort, config.missing_rate, derive_seed(config.seed, 0x4D495353ULL));
  return cohort;
}

Cohort inject_missing(const Cohort& cohort, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("inject_missing: rate must lie in [0,1)");
  Cohort out = cohort;
  if (rate == 0.0) return out;
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < out.covariates.rows(); ++i)
    for (std::size_t j = 0; j < out.covariates.cols(); ++j)
      if (unif(rng) < rate) out.covariates(i, j) = missing_value();
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void write_cohort_csv(const Cohort& cohort, std::ostream& os, const std::string& provenance) {
  if (!provenance.empty()) os << "# " << provenance << "\n";
  os << "id,y,d,a";
  for (std::size_t j = 0; j < cohort.n_covariates(); ++j) os << ",x" << (j + 1);
  os << "\n";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    os << (i + 1) << ',' << cohort.outcome[i] << ',' << cohort.assigned[i] << ','
       << format_double(cohort.adherence[i]);
    for (std::size_t j = 0; j < cohort.n_covariates(); ++j) {
      os << ',';
      const double v = cohort.covariates(i, j);
      if (!is_missing(v)) os << format_double(v);
    }
    os << "\n";
  }
}

std::string cohort_to_csv(const Cohort& cohort, const std::string& provenance) {
  std::ostringstream oss;
  write_cohort_csv(cohort, oss, provenance);
  return oss.str();
}

Cohort read_cohort_csv(std::istream& is, int n_treatments) {
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::size_t n_fields = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 4 || fields[0] != "id" || fields[1] != "y" || fields[2] != "d" ||
          fields[3] != "a")
        throw ValidationError("cohort csv: expected header id,y,d,a,x1..xp");
      n_fields = fields.size();
      continue;
    }
    if (fields.size() != n_fields)
      throw ValidationError("cohort csv: inconsistent field count on a data row");
    rows.push_back(std::move(fields));
  }
  if (!header_seen) throw ValidationError("cohort csv: missing header");

  const std::size_t n = rows.size();
  const std::size_t p = n_fields - 4;
  if (n == 0 || p == 0) throw ValidationError("cohort csv: need n >= 1 and p >= 1");

  Cohort cohort;
  cohort.covariates = Matrix(n, p);
  cohort.assigned.resize(n);
  cohort.adherence.resize(n);
  cohort.outcome.resize(n);
  cohort.n_treatments = n_treatments;
  int max_d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = rows[i];
    cohort.outcome[i] = std::stoi(f[1]);
    if (cohort.outcome[i] != 0 && cohort.outcome[i] != 1)
      throw ValidationError("cohort csv: outcome must be 0 or 1");
    cohort.assigned[i] = std::stoi(f[2]);
    if (cohort.assigned[i] < 0) throw ValidationError("cohort csv: negative treatment id");
    max_d = std::max(max_d, cohort.assigned[i]);
    cohort.adherence[i] = std::stod(f[3]);
    if (cohort.assigned[i] == 0 && cohort.adherence[i] != 0.0)
      throw ValidationError("cohort csv: adherence must be 0 for untreated rows");
    for (std::size_t j = 0; j < p; ++j) {
      const std::string& cell = f[4 + j];
      cohort.covariates(i, j) = cell.empty() ? missing_value() : std::stod(cell);
    }
  }
  if (n_treatments <= 0) cohort.n_treatments = max_d;
  if (max_d > cohort.n_treatments)
    throw ValidationError("cohort csv: treatment id exceeds declared option count");
  return cohort;
}

}  // namespace policylearn
