#pragma once

#include "pibench/algorithms.hpp"
#include "pibench/concentrability.hpp"
#include "pibench/garnet.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace pibench::io {

using Json = nlohmann::json;

/// Shortest decimal string that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    detail::ensure(res.ec == std::errc(), "format_double: conversion failed");
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text) {
    double x = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
    detail::require(res.ec == std::errc() && res.ptr == text.data() + text.size(), "not a number: '" + text + "'");
    return x;
}

inline std::string hex64(std::uint64_t x) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << x;
    return os.str();
}

// ---- files ----

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(static_cast<bool>(in), "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    detail::require(static_cast<bool>(out), "cannot open '" + path.string() + "' for writing");
    out << text;
    detail::require(static_cast<bool>(out), "write to '" + path.string() + "' failed");
}

inline Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw InvalidInput("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- matrices ----

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    detail::require(j.is_array() && static_cast<Eigen::Index>(j.size()) == rows, what + ": wrong number of rows");
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Json& row = j[r];
        detail::require(row.is_array() && static_cast<Eigen::Index>(row.size()) == cols,
                        what + ": wrong number of columns");
        for (Eigen::Index c = 0; c < cols; ++c) {
            detail::require(row[c].is_number(), what + ": entries must be numbers");
            m(r, c) = row[c].get<double>();
        }
    }
    return m;
}

inline Json vector_to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Vector vector_from_json(const Json& j, Eigen::Index size, const std::string& what) {
    detail::require(j.is_array() && static_cast<Eigen::Index>(j.size()) == size, what + ": wrong length");
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) {
        detail::require(j[i].is_number(), what + ": entries must be numbers");
        v(i) = j[i].get<double>();
    }
    return v;
}

template <class T>
T field(const Json& j, const char* key, const std::string& what) {
    detail::require(j.is_object() && j.contains(key), what + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw InvalidInput(what + ": field '" + key + "' has the wrong type");
    }
}

// ---- model objects ----

inline Json to_json(const FiniteMdp& mdp) {
    Json t = Json::array();
    for (const Matrix& p : mdp.transitions()) t.push_back(matrix_to_json(p));
    return {{"n_states", mdp.n_states()}, {"n_actions", mdp.n_actions()}, {"gamma", mdp.gamma()},
            {"r_max", mdp.r_max()},       {"rewards", vector_to_json(mdp.rewards())}, {"transitions", t}};
}

inline FiniteMdp mdp_from_json(const Json& j) {
    const int n = field<int>(j, "n_states", "mdp");
    const int na = field<int>(j, "n_actions", "mdp");
    detail::require(n >= 1 && na >= 1, "mdp: sizes must be positive");
    const Json& t = j.at("transitions");
    detail::require(t.is_array() && static_cast<int>(t.size()) == na, "mdp: one transition matrix per action");
    std::vector<Matrix> transitions;
    for (int a = 0; a < na; ++a) transitions.push_back(matrix_from_json(t[a], n, n, "mdp transitions"));
    return FiniteMdp(std::move(transitions), vector_from_json(j.at("rewards"), n, "mdp rewards"),
                     field<double>(j, "gamma", "mdp"), field<double>(j, "r_max", "mdp"));
}

inline Json to_json(const FeatureMatrix& f) {
    return {{"n_states", f.n_states()}, {"n_features", f.n_features()}, {"phi", matrix_to_json(f.phi())}};
}

inline FeatureMatrix features_from_json(const Json& j) {
    const int n = field<int>(j, "n_states", "features");
    const int p = field<int>(j, "n_features", "features");
    detail::require(n >= 1 && p >= 1, "features: sizes must be positive");
    return FeatureMatrix(matrix_from_json(j.at("phi"), n, p, "features"));
}

inline Json to_json(const StationaryPolicy& pi) {
    return {{"n_states", pi.n_states()}, {"n_actions", pi.n_actions()}, {"probs", matrix_to_json(pi.probs())}};
}

inline StationaryPolicy policy_from_json(const Json& j) {
    const int n = field<int>(j, "n_states", "policy");
    const int na = field<int>(j, "n_actions", "policy");
    detail::require(n >= 1 && na >= 1, "policy: sizes must be positive");
    return StationaryPolicy(matrix_from_json(j.at("probs"), n, na, "policy"));
}

inline Json to_json(const PolicyStack& stack) {
    Json members = Json::array();
    for (const auto& p : stack.policies()) members.push_back(to_json(p));
    const bool periodic = stack.interpretation() == PolicyStack::Interpretation::Periodic;
    return {{"interpretation", periodic ? "periodic" : "finite_horizon"}, {"policies", members}};
}

inline PolicyStack stack_from_json(const Json& j) {
    const auto kind = field<std::string>(j, "interpretation", "stack");
    detail::require(kind == "periodic" || kind == "finite_horizon", "stack: unknown interpretation '" + kind + "'");
    std::vector<StationaryPolicy> members;
    for (const Json& p : j.at("policies")) members.push_back(policy_from_json(p));
    return PolicyStack(kind == "periodic" ? PolicyStack::Interpretation::Periodic
                                          : PolicyStack::Interpretation::FiniteHorizon,
                       std::move(members));
}

// ---- concentrability ----

inline Json coefficient_to_json(const Coefficient& c) {
    return c.is_infinite() ? Json("inf") : Json(c.value());
}

inline Coefficient coefficient_from_json(const Json& j) {
    if (j.is_string()) {
        detail::require(j.get<std::string>() == "inf", "coefficient: expected a number or \"inf\"");
        return Coefficient::infinity();
    }
    detail::require(j.is_number(), "coefficient: expected a number or \"inf\"");
    return Coefficient::finite(j.get<double>());
}

inline Json raw_to_json(double x) { return std::isfinite(x) ? Json(x) : Json("inf"); }

inline double raw_from_json(const Json& j) {
    return j.is_string() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

inline Json table_to_json(const CoefficientTable& t) {
    Json c = Json::array();
    Json raw = Json::array();
    for (std::size_t i = 0; i < t.clamped.size(); ++i) {
        c.push_back(coefficient_to_json(t.clamped[i]));
        raw.push_back(raw_to_json(t.raw[i]));
    }
    return {{"values", c}, {"raw", raw}};
}

inline CoefficientTable table_from_json(const Json& j) {
    CoefficientTable t;
    for (const Json& c : j.at("values")) t.clamped.push_back(coefficient_from_json(c));
    for (const Json& r : j.at("raw")) t.raw.push_back(raw_from_json(r));
    detail::require(t.clamped.size() == t.raw.size(), "report: coefficient table lengths differ");
    return t;
}

inline Json aggregate_to_json(const Aggregate& a) {
    return {{"value", coefficient_to_json(a.value)}, {"tail", a.tail}};
}

inline Aggregate aggregate_from_json(const Json& j) {
    return {coefficient_from_json(j.at("value")), field<double>(j, "tail", "aggregate")};
}

inline Json to_json(const ConcentrabilityReport& r) {
    Json c1 = Json::object();
    for (const auto& [k, a] : r.C1) c1[std::to_string(k)] = aggregate_to_json(a);
    Json c2 = Json::array();
    for (const auto& [mk, a] : r.C2) {
        Json e = aggregate_to_json(a);
        e["m"] = mk.first;
        e["k"] = mk.second;
        c2.push_back(std::move(e));
    }
    return {{"gamma", r.gamma},
            {"v_max", r.v_max},
            {"tolerance", r.tolerance},
            {"cap", r.cap},
            {"truncation_index", r.truncation_index},
            {"m_values", r.m_values},
            {"c", table_to_json(r.c)},
            {"c_pistar", table_to_json(r.c_pistar)},
            {"C1", c1},
            {"C2", c2},
            {"C1_pistar", aggregate_to_json(r.C1_pistar)},
            {"C_pistar", coefficient_to_json(r.C_pistar)},
            {"C_pistar_raw", raw_to_json(r.C_pistar_raw)}};
}

inline ConcentrabilityReport report_from_json(const Json& j) {
    ConcentrabilityReport r;
    r.gamma = field<double>(j, "gamma", "report");
    r.v_max = field<double>(j, "v_max", "report");
    r.tolerance = field<double>(j, "tolerance", "report");
    r.cap = field<double>(j, "cap", "report");
    r.truncation_index = field<int>(j, "truncation_index", "report");
    r.m_values = field<std::vector<int>>(j, "m_values", "report");
    r.c = table_from_json(j.at("c"));
    r.c_pistar = table_from_json(j.at("c_pistar"));
    for (const auto& [k, a] : j.at("C1").items()) r.C1[std::stoi(k)] = aggregate_from_json(a);
    for (const Json& e : j.at("C2")) r.C2[{field<int>(e, "m", "C2"), field<int>(e, "k", "C2")}] = aggregate_from_json(e);
    r.C1_pistar = aggregate_from_json(j.at("C1_pistar"));
    r.C_pistar = coefficient_from_json(j.at("C_pistar"));
    r.C_pistar_raw = raw_from_json(j.at("C_pistar_raw"));
    detail::require(r.gamma > 0.0 && r.gamma < 1.0, "report: gamma must lie in (0,1)");
    return r;
}

// ---- traces ----

inline const char* to_string(Termination t) { return t == Termination::CPIStopped ? "cpi_stopped" : "max_iter"; }

inline Json to_json(const IterationRecord& rec) {
    Json j = {{"k", rec.k},     {"epsilon", rec.epsilon}, {"epsilon_nu", rec.epsilon_nu}, {"alpha", rec.alpha},
              {"eta", rec.eta}, {"loss", rec.loss},       {"policy_digest", hex64(rec.policy_digest)}};
    if (rec.advantage) j["advantage"] = *rec.advantage;
    if (rec.horizon_loss) j["horizon_loss"] = *rec.horizon_loss;
    return j;
}

inline Json to_json(const RunTrace& trace) {
    Json records = Json::array();
    for (const auto& r : trace.records) records.push_back(to_json(r));
    Json j = {{"scheme", to_string(trace.scheme)}, {"termination", to_string(trace.termination)}, {"records", records}};
    if (trace.stop_epsilon) j["stop_epsilon"] = *trace.stop_epsilon;
    if (trace.stop_advantage) j["stop_advantage"] = *trace.stop_advantage;
    std::visit([&](const auto& p) { j["final_policy"] = to_json(p); }, trace.final_policy);
    return j;
}

inline constexpr const char* kTraceHeader = "k,epsilon,alpha,eta,loss,advantage,epsilon_nu";

/// One row per iteration; advantage is empty outside the CPI family.
inline std::string trace_csv(const std::vector<IterationRecord>& records) {
    std::string out = std::string(kTraceHeader) + "\n";
    for (const auto& r : records) {
        out += std::to_string(r.k) + "," + format_double(r.epsilon) + "," + format_double(r.alpha) + "," +
               format_double(r.eta) + "," + format_double(r.loss) + "," +
               (r.advantage ? format_double(*r.advantage) : std::string()) + "," + format_double(r.epsilon_nu) +
               "\n";
    }
    return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

/// Parses trace_csv output back; digests and horizon losses are not part of the CSV.
inline std::vector<IterationRecord> parse_trace_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    detail::require(static_cast<bool>(std::getline(in, line)), "trace csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    detail::require(line == kTraceHeader, "trace csv: unexpected header '" + line + "'");
    std::vector<IterationRecord> records;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cols = split(line, ',');
        detail::require(cols.size() == 7, "trace csv: expected 7 columns, got " + std::to_string(cols.size()));
        IterationRecord r;
        r.k = static_cast<int>(parse_double(cols[0]));
        r.epsilon = parse_double(cols[1]);
        r.alpha = parse_double(cols[2]);
        r.eta = parse_double(cols[3]);
        r.loss = parse_double(cols[4]);
        if (!cols[5].empty()) r.advantage = parse_double(cols[5]);
        r.epsilon_nu = parse_double(cols[6]);
        records.push_back(r);
    }
    return records;
}

} // namespace pibench::io
