#pragma once

#include "lqrflow/bounds.hpp"
#include "lqrflow/flows.hpp"
#include "lqrflow/verify.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lqrflow {

// Fixed shortest-roundtrip formatting so identical runs produce
// byte-identical artifacts.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError("matrix '" + name + "' must be a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols)
            throw ConfigError("matrix '" + name + "' has ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) {
            if (!j[i][k].is_number())
                throw ConfigError("matrix '" + name + "' has a non-numeric entry");
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

// Plant document: {"A": [[..]], "B": [[..]], "Q": [[..]], "R": [[..]]}, row-major.
inline PlantModel plant_from_json(const nlohmann::json& j,
                                  const Tolerances& tol = default_tolerances()) {
    for (const char* key : {"A", "B", "Q", "R"})
        if (!j.contains(key))
            throw ConfigError(std::string("plant document missing matrix '") + key + "'");
    return PlantModel(matrix_from_json(j["A"], "A"), matrix_from_json(j["B"], "B"),
                      matrix_from_json(j["Q"], "Q"), matrix_from_json(j["R"], "R"), tol);
}

inline nlohmann::json plant_to_json(const PlantModel& plant) {
    return nlohmann::json{{"A", matrix_to_json(plant.A())},
                          {"B", matrix_to_json(plant.B())},
                          {"Q", matrix_to_json(plant.Q())},
                          {"R", matrix_to_json(plant.R())}};
}

inline PlantModel load_plant(const std::string& path,
                             const Tolerances& tol = default_tolerances()) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open plant file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed plant JSON in " + path + ": " + e.what());
    }
    return plant_from_json(j, tol);
}

inline void save_plant(const PlantModel& plant, const std::string& path) {
    std::ofstream out(path);
    out << plant_to_json(plant).dump(2) << "\n";
}

inline std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream out;
    out << "s,V3,V4,V5,V6,grad_norm,W_norm,abscissa\n";
    for (const TrajectorySample& smp : traj.samples) {
        out << format_double(smp.s) << ',' << format_double(smp.V3) << ','
            << format_double(smp.V4) << ',' << format_double(smp.V5) << ','
            << format_double(smp.V6) << ',' << format_double(smp.grad_norm) << ','
            << format_double(smp.W_norm) << ',' << format_double(smp.spectral_abscissa) << '\n';
    }
    return out.str();
}

struct LemmaCsvRow {
    LemmaId lemma_id;
    std::uint64_t seed;
    double dK_norm;
    double lhs, rhs, slack;
};

inline std::string lemma_csv(const std::vector<LemmaCsvRow>& rows) {
    std::ostringstream out;
    out << "lemma_id,seed,dK_norm,lhs,rhs,slack\n";
    for (const LemmaCsvRow& r : rows) {
        out << lemma_name(r.lemma_id) << ',' << r.seed << ',' << format_double(r.dK_norm) << ','
            << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
            << format_double(r.slack) << '\n';
    }
    return out.str();
}

inline std::string counterexample_csv(const CounterexampleRun& run) {
    std::ostringstream out;
    out << "t,chi\n";
    for (std::size_t i = 0; i < run.times.size(); ++i)
        out << format_double(run.times[i]) << ',' << format_double(run.chi[i]) << '\n';
    return out.str();
}

inline std::string saturation_csv(const std::vector<SaturationRow>& rows) {
    std::ostringstream out;
    out << "z,grad_abs,xi1_bound\n";
    for (const SaturationRow& r : rows)
        out << format_double(r.z) << ',' << format_double(r.grad_abs) << ','
            << format_double(r.xi1_bound) << '\n';
    return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write file: " + path);
    out << content;
}

}  // namespace lqrflow
