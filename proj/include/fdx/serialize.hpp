#pragma once

// JSON I/O: experiment configs (strict, snake_case), realization dumps for
// regression fixtures and bounds reports. Complex values are [re, im] pairs.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fdx/air_interface.hpp"
#include "fdx/bounds.hpp"
#include "fdx/harness.hpp"

namespace fdx {

using Json = nlohmann::json;

inline Json to_json(const ComplexVec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v(i).real(), v(i).imag()});
  return a;
}

inline ComplexVec complex_vec_from_json(const Json& a) {
  ComplexVec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = cplx(a[i].at(0).get<double>(), a[i].at(1).get<double>());
  }
  return v;
}

inline Json to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline Json to_json(const LinkRealization& link) {
  return Json{{"h_si", to_json(link.h_si.taps)},
              {"h_si_power", link.h_si.total_power},
              {"h_soi", to_json(link.h_soi.taps)},
              {"h_soi_power", link.h_soi.total_power},
              {"h_d", to_json(link.h_d)},
              {"x_si", to_json(link.x_si)},
              {"x_soi", to_json(link.x_soi)},
              {"data_symbols", link.data_symbols},
              {"j_si", to_json(link.j_si.coeffs)},
              {"j_soi", to_json(link.j_soi.coeffs)},
              {"noise", to_json(link.noise)},
              {"y", to_json(link.y)}};
}

inline LinkRealization link_from_json(const Json& j) {
  LinkRealization link;
  link.h_si = {complex_vec_from_json(j.at("h_si")), j.at("h_si_power").get<double>()};
  link.h_soi = {complex_vec_from_json(j.at("h_soi")), j.at("h_soi_power").get<double>()};
  link.h_d = complex_vec_from_json(j.at("h_d"));
  link.x_si = complex_vec_from_json(j.at("x_si"));
  link.x_soi = complex_vec_from_json(j.at("x_soi"));
  link.data_symbols = j.at("data_symbols").get<std::vector<std::size_t>>();
  link.j_si = {complex_vec_from_json(j.at("j_si"))};
  link.j_soi = {complex_vec_from_json(j.at("j_soi"))};
  link.noise = complex_vec_from_json(j.at("noise"));
  link.y = complex_vec_from_json(j.at("y"));
  return link;
}

inline Json to_json(const BoundsReport& r) {
  Json j{{"lambda_i", r.lambda_i},       {"lambda_s", r.lambda_s}, {"sigma_e2", r.sigma_e2},
         {"c_lb0", r.c_lb0},             {"d_lb0", r.d_lb0},       {"gamma0", r.gamma0},
         {"gamma1", r.gamma1},           {"gamma_ij", to_json(r.gamma_ij)},
         {"p_ij", to_json(r.p_ij)},      {"ber_lb_general", r.ber_lb_general}};
  j["ber_lb_bpsk"] = std::isnan(r.ber_lb_bpsk) ? Json(nullptr) : Json(r.ber_lb_bpsk);
  return j;
}

inline constexpr const char* kBoundsCsvHeader =
    "snr_db,inr_db,delta_f,lambda_i,lambda_s,sigma_e2,c_lb0,d_lb0,gamma0_db,gamma1_db,ber_lb";

inline std::string bounds_csv_row(const BoundsRow& row) {
  const BoundsReport& r = row.report;
  const double ber = std::isnan(r.ber_lb_bpsk) ? r.ber_lb_general : r.ber_lb_bpsk;
  std::string s;
  for (double v : {row.snr_db, row.inr_db, row.delta_f, r.lambda_i, r.lambda_s, r.sigma_e2, r.c_lb0, r.d_lb0,
                   linear_to_db(r.gamma0), linear_to_db(r.gamma1), ber}) {
    if (!s.empty()) s += ',';
    s += shortest_double(v);
  }
  return s;
}

namespace detail {

inline void reject_unknown(const Json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::Config, where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw Error(ErrorCode::Config, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const Json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad value for '") + key + "': " + e.what());
  }
}

/// Accepts a scalar or a list.
inline void read_list(const Json& obj, const char* key, std::vector<double>& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  if (v.is_number()) {
    out = {v.get<double>()};
  } else {
    read_opt(obj, key, out);
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  static const std::set<std::string> top{"params",      "delta_f",        "snr_db_grid",     "inr_db_grid",
                                         "n_iters",     "n_trials",       "seed",            "oracle_si_csi",
                                         "oscillator_mode", "si_delay",   "constellation",   "stage1_iters",
                                         "output_path", "threads"};
  static const std::set<std::string> par{"subcarriers",      "pilots",           "si_taps",    "soi_taps",
                                         "si_channel_power", "soi_channel_power", "noise_power"};
  detail::reject_unknown(j, top, "config");
  ExperimentConfig cfg;
  if (j.contains("params")) {
    const Json& p = j.at("params");
    detail::reject_unknown(p, par, "params");
    detail::read_opt(p, "subcarriers", cfg.params.subcarriers);
    detail::read_opt(p, "pilots", cfg.params.pilots);
    detail::read_opt(p, "si_taps", cfg.params.si_taps);
    detail::read_opt(p, "soi_taps", cfg.params.soi_taps);
    detail::read_opt(p, "si_channel_power", cfg.params.si_channel_power);
    detail::read_opt(p, "soi_channel_power", cfg.params.soi_channel_power);
    detail::read_opt(p, "noise_power", cfg.params.noise_power);
  }
  detail::read_list(j, "delta_f", cfg.delta_f);
  detail::read_list(j, "snr_db_grid", cfg.snr_db_grid);
  detail::read_list(j, "inr_db_grid", cfg.inr_db_grid);
  detail::read_opt(j, "n_iters", cfg.n_iters);
  detail::read_opt(j, "n_trials", cfg.n_trials);
  detail::read_opt(j, "seed", cfg.seed);
  detail::read_opt(j, "oracle_si_csi", cfg.oracle_si_csi);
  if (j.contains("oscillator_mode")) {
    std::string mode;
    detail::read_opt(j, "oscillator_mode", mode);
    try {
      cfg.oscillator_mode = parse_oscillator_mode(mode);
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, e.what());
    }
  }
  detail::read_opt(j, "si_delay", cfg.si_delay);
  detail::read_opt(j, "constellation", cfg.constellation);
  detail::read_opt(j, "stage1_iters", cfg.stage1_iters);
  detail::read_opt(j, "output_path", cfg.output_path);
  detail::read_opt(j, "threads", cfg.threads);
  validate_config(cfg);
  return cfg;
}

inline Json to_json(const ExperimentConfig& cfg) {
  return Json{{"params",
               {{"subcarriers", cfg.params.subcarriers},
                {"pilots", cfg.params.pilots},
                {"si_taps", cfg.params.si_taps},
                {"soi_taps", cfg.params.soi_taps},
                {"si_channel_power", cfg.params.si_channel_power},
                {"soi_channel_power", cfg.params.soi_channel_power},
                {"noise_power", cfg.params.noise_power}}},
              {"delta_f", cfg.delta_f},
              {"snr_db_grid", cfg.snr_db_grid},
              {"inr_db_grid", cfg.inr_db_grid},
              {"n_iters", cfg.n_iters},
              {"n_trials", cfg.n_trials},
              {"seed", cfg.seed},
              {"oracle_si_csi", cfg.oracle_si_csi},
              {"oscillator_mode", std::string(to_string(cfg.oscillator_mode))},
              {"si_delay", cfg.si_delay},
              {"constellation", cfg.constellation},
              {"stage1_iters", cfg.stage1_iters},
              {"output_path", cfg.output_path},
              {"threads", cfg.threads}};
}

/// Reads and validates a config file. Every failure is a Config error naming
/// the path.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::Config, "cannot read config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, "'" + path + "': " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, "'" + path + "': " + e.what());
  }
}

}  // namespace fdx
