#include "policylearn/cate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "policylearn/errors.hpp"
#include "policylearn/ols.hpp"

namespace policylearn {

double CateTable::tau_at(int g, int d) const {
  if (g < 1 || g > n_groups()) throw ValidationError("CateTable: unknown group");
  if (d < 1 || d > n_treatments) throw ValidationError("CateTable: unknown treatment");
  return groups[static_cast<std::size_t>(g - 1)].tau[static_cast<std::size_t>(d - 1)];
}

GroupLpm fit_group_lpm(const Cohort& cohort, const std::vector<int>& z, int g) {
  if (z.size() != cohort.size()) throw ValidationError("fit_group_lpm: assignment length != n");
  const int D = cohort.n_treatments;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < cohort.size(); ++i)
    if (z[i] == g) rows.push_back(i);
  if (rows.size() < static_cast<std::size_t>(D + 1))
    throw ValidationError("fit_group_lpm: group " + std::to_string(g) +
                          " has fewer than D+1 observations");

  Matrix x(rows.size(), static_cast<std::size_t>(D + 1), 0.0);
  Vector y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    x(r, 0) = 1.0;
    for (int d = 1; d <= D; ++d) x(r, static_cast<std::size_t>(d)) = cohort.adherence_for(i, d);
    y[r] = static_cast<double>(cohort.outcome[i]);
  }
  std::vector<std::string> names{"intercept"};
  for (int d = 1; d <= D; ++d) names.push_back("adherence_d" + std::to_string(d));

  const OlsFit ols = fit_ols(x, y, names);
  GroupLpm out;
  out.group = g;
  out.n_obs = rows.size();
  out.beta0 = ols.coef[0];
  out.se_beta0 = ols.se_hc2[0];
  out.tau.assign(ols.coef.begin() + 1, ols.coef.end());
  out.se_tau.assign(ols.se_hc2.begin() + 1, ols.se_hc2.end());
  return out;
}

CateTable fit_cate_table(const Cohort& cohort, const std::vector<int>& z, int n_groups) {
  CateTable table;
  table.n_treatments = cohort.n_treatments;
  for (int g = 1; g <= n_groups; ++g) table.groups.push_back(fit_group_lpm(cohort, z, g));
  return table;
}

double cate_at_adherence(const CateTable& table, int d, int g, double a) {
  if (a < 0.0 || a > 1.0) throw ValidationError("cate_at_adherence: a outside [0,1]");
  return table.tau_at(g, d) * a;
}

double expected_effectiveness(const CateTable& table, const GroupPriorRow& prior, int d) {
  if (static_cast<int>(prior.size()) != table.n_groups())
    throw ValidationError("expected_effectiveness: prior length != S");
  double s = 0.0;
  for (int g = 1; g <= table.n_groups(); ++g)
    s += table.tau_at(g, d) * prior[static_cast<std::size_t>(g - 1)];
  return s;
}

double population_ate(const CateTable& table, const Vector& group_shares, int d, double a) {
  if (static_cast<int>(group_shares.size()) != table.n_groups())
    throw ValidationError("population_ate: shares length != S");
  double sum = 0.0;
  for (double s : group_shares) sum += s;
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("population_ate: shares must sum to 1");
  double out = 0.0;
  for (int g = 1; g <= table.n_groups(); ++g)
    out += group_shares[static_cast<std::size_t>(g - 1)] * cate_at_adherence(table, d, g, a);
  return out;
}

QuantileSummary quantile_aggregate(const Vector& samples) {
  if (samples.size() < 2) throw ValidationError("quantile_aggregate: need at least 2 samples");
  Vector s = samples;
  std::sort(s.begin(), s.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, s.size() - 1);
    const double frac = h - std::floor(h);
    return s[lo] + frac * (s[hi] - s[lo]);
  };
  return QuantileSummary{quantile(0.5), quantile(0.025), quantile(0.975)};
}

namespace {

nlohmann::json summary_json(const QuantileSummary& q) {
  return nlohmann::json{{"median", q.median}, {"lo", q.lo}, {"hi", q.hi}};
}

QuantileSummary summary_from_json(const nlohmann::json& j) {
  return QuantileSummary{j.at("median").get<double>(), j.at("lo").get<double>(),
                         j.at("hi").get<double>()};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string cate_table_to_json(const CateTable& table, const std::string& provenance) {
  nlohmann::json j;
  if (!provenance.empty()) j["provenance"] = provenance;
  j["n_treatments"] = table.n_treatments;
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : table.groups) {
    nlohmann::json jg{{"group", g.group},     {"beta0", g.beta0}, {"se_beta0", g.se_beta0},
                      {"tau", g.tau},         {"se_tau", g.se_tau},
                      {"n_obs", g.n_obs}};
    groups.push_back(std::move(jg));
  }
  j["groups"] = std::move(groups);
  if (table.has_aggregate()) {
    nlohmann::json agg = nlohmann::json::array();
    for (std::size_t gi = 0; gi < table.groups.size(); ++gi) {
      nlohmann::json jg;
      jg["group"] = table.groups[gi].group;
      jg["beta0"] = summary_json(table.beta0_agg[gi]);
      nlohmann::json taus = nlohmann::json::array();
      for (const auto& q : table.tau_agg[gi]) taus.push_back(summary_json(q));
      jg["tau"] = std::move(taus);
      agg.push_back(std::move(jg));
    }
    j["aggregated"] = std::move(agg);
  }
  if (table.has_aggregate_ci()) {
    nlohmann::json agg = nlohmann::json::array();
    for (std::size_t gi = 0; gi < table.groups.size(); ++gi) {
      nlohmann::json jg;
      jg["group"] = table.groups[gi].group;
      jg["beta0"] = summary_json(table.beta0_ci[gi]);
      nlohmann::json taus = nlohmann::json::array();
      for (const auto& q : table.tau_ci[gi]) taus.push_back(summary_json(q));
      jg["tau"] = std::move(taus);
      agg.push_back(std::move(jg));
    }
    j["aggregated_ci95"] = std::move(agg);
  }
  return j.dump(2) + "\n";
}

CateTable cate_table_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CateTable table;
  table.n_treatments = j.at("n_treatments").get<int>();
  for (const auto& jg : j.at("groups")) {
    GroupLpm g;
    g.group = jg.at("group").get<int>();
    g.beta0 = jg.at("beta0").get<double>();
    g.se_beta0 = jg.at("se_beta0").get<double>();
    g.tau = jg.at("tau").get<Vector>();
    g.se_tau = jg.at("se_tau").get<Vector>();
    g.n_obs = jg.at("n_obs").get<std::size_t>();
    table.groups.push_back(std::move(g));
  }
  if (j.contains("aggregated")) {
    for (const auto& jg : j.at("aggregated")) {
      table.beta0_agg.push_back(summary_from_json(jg.at("beta0")));
      std::vector<QuantileSummary> taus;
      for (const auto& jt : jg.at("tau")) taus.push_back(summary_from_json(jt));
      table.tau_agg.push_back(std::move(taus));
    }
  }
  if (j.contains("aggregated_ci95")) {
    for (const auto& jg : j.at("aggregated_ci95")) {
      table.beta0_ci.push_back(summary_from_json(jg.at("beta0")));
      std::vector<QuantileSummary> taus;
      for (const auto& jt : jg.at("tau")) taus.push_back(summary_from_json(jt));
      table.tau_ci.push_back(std::move(taus));
    }
  }
  return table;
}

std::string cate_table_to_csv(const CateTable& table, const std::string& provenance) {
  std::ostringstream os;
  if (!provenance.empty()) os << "# " << provenance << "\n";
  os << "group,term,estimate,se,median,lo,hi\n";
  for (std::size_t gi = 0; gi < table.groups.size(); ++gi) {
    const auto& g = table.groups[gi];
    const bool agg = table.has_aggregate();
    const auto emit = [&](const std::string& term, double est, double se,
                          const QuantileSummary* q) {
      os << g.group << ',' << term << ',' << fmt(est) << ',' << fmt(se) << ',';
      if (q != nullptr) os << fmt(q->median) << ',' << fmt(q->lo) << ',' << fmt(q->hi);
      else os << ",,";
      os << "\n";
    };
    emit("beta0", g.beta0, g.se_beta0, agg ? &table.beta0_agg[gi] : nullptr);
    for (std::size_t d = 0; d < g.tau.size(); ++d)
      emit("tau_d" + std::to_string(d + 1), g.tau[d], g.se_tau[d],
           agg ? &table.tau_agg[gi][d] : nullptr);
  }
  return os.str();
}

}  // namespace policylearn
