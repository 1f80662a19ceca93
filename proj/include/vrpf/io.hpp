#ifndef VRPF_IO_HPP
#define VRPF_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "vrpf/bounds.hpp"
#include "vrpf/errors.hpp"
#include "vrpf/lgssm.hpp"
#include "vrpf/proposal.hpp"
#include "vrpf/training.hpp"

// File formats. CSV numbers are rendered with 17 significant digits so two
// runs of the same configuration diff byte-for-byte. Lines starting with
// '#' are comments; commands use them to embed the resolved configuration
// into every CSV they write.

namespace vrpf {

using nlohmann::json;

/// Shortest-exact decimal rendering: 17 significant digits round-trip any
/// double bit-exactly.
inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Mat mat_from_json(const json& j) {
    const std::size_t rows = j.size();
    const std::size_t cols = rows == 0 ? 0 : j.at(0).size();
    Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j.at(i).size() != cols) throw IoError("ragged matrix in JSON");
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
    }
    return m;
}

inline json phi_to_json(const ProposalParams& phi) {
    return json{{"mu", phi.mu}, {"log_var", phi.log_var}};
}

inline ProposalParams phi_from_json(const json& j) {
    ProposalParams phi;
    phi.mu = j.at("mu").get<Vec>();
    phi.log_var = j.at("log_var").get<Vec>();
    if (phi.mu.size() != phi.log_var.size())
        throw IoError("proposal JSON: mu and log_var lengths differ");
    return phi;
}

/// One row per time step, columns x1..x{d_x}. '#'-prefixed lines and the
/// header row are skipped by the reader.
inline std::string dataset_to_csv(const Dataset& data, const std::string& comment = "") {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    const std::size_t d_x = data.x.empty() ? 0 : data.x.front().size();
    for (std::size_t j = 0; j < d_x; ++j) out << (j ? "," : "") << "x" << (j + 1);
    out << "\n";
    for (const Vec& row : data.x) {
        for (std::size_t j = 0; j < row.size(); ++j)
            out << (j ? "," : "") << fmt_g17(row[j]);
        out << "\n";
    }
    return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

inline Dataset dataset_from_csv(const std::string& text) {
    Dataset data;
    std::istringstream in(text);
    std::string line;
    bool header_skipped = false;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        const auto cells = split_csv_line(line);
        Vec row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(std::stod(c));
        data.x.push_back(std::move(row));
    }
    if (data.x.empty()) throw IoError("dataset CSV contains no observations");
    return data;
}

/// Wall-clock time never reaches file outputs: written files must reproduce
/// byte-for-byte when a command is re-run with the same config.
inline json bound_report_to_json(const BoundReport& r, const json& config_echo) {
    json steps = json::array();
    for (std::size_t t = 0; t < r.step_terms.size(); ++t) {
        steps.push_back(json{{"t", t + 1},
                             {"log_mean_w", r.step_terms[t]},
                             {"mean_accept_trials", r.step_mean_trials[t]},
                             {"mean_race_iters", r.step_mean_race_iters[t]}});
    }
    return json{{"total", r.total},
                {"steps", std::move(steps)},
                {"mean_accept_trials", r.mean_accept_trials},
                {"acceptance_rate", r.acceptance_rate},
                {"mean_race_iters", r.mean_race_iters},
                {"config", config_echo}};
}

/// Per-step bound terms as CSV: t, log_mean_w, mean_accept_trials,
/// mean_race_iters.
inline std::string bound_report_steps_csv(const BoundReport& r, const std::string& comment = "") {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "t,log_mean_w,mean_accept_trials,mean_race_iters\n";
    for (std::size_t t = 0; t < r.step_terms.size(); ++t) {
        out << (t + 1) << ',' << fmt_g17(r.step_terms[t]) << ','
            << fmt_g17(r.step_mean_trials[t]) << ',' << fmt_g17(r.step_mean_race_iters[t])
            << "\n";
    }
    return out.str();
}

inline std::string train_trace_csv(const TrainTrace& trace, const std::string& comment = "") {
    std::ostringstream out;
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "epoch,bound,grad_norm,acceptance_rate,m_refreshed,lr\n";
    for (const EpochRecord& e : trace.epochs) {
        out << e.epoch << ',' << fmt_g17(e.bound) << ',' << fmt_g17(e.grad_norm) << ','
            << fmt_g17(e.acceptance_rate) << ',' << (e.m_refreshed ? 1 : 0) << ','
            << fmt_g17(e.lr) << "\n";
    }
    if (!trace.abort_reason.empty()) out << "# aborted: " << trace.abort_reason << "\n";
    return out.str();
}

}  // namespace vrpf

#endif  // VRPF_IO_HPP
