// File formats: z-score input parsing and the fit/study output artifacts.
// All floats are printed with 12 significant digits, '.' decimal separator,
// locale-independent.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prtest/inference.hpp"
#include "prtest/simulation.hpp"

namespace prtest {

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t line_number)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + msg),
          line(line_number) {}
    std::size_t line;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline bool parse_double(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end != '\0') {
        if (!std::isspace(static_cast<unsigned char>(*end))) return false;
        ++end;
    }
    return true;
}

}  // namespace detail

// Reads one z-score per line. '#' comment lines and blank lines are
// ignored; a single non-numeric first data line is accepted as a CSV
// header. Any other unparsable or non-finite line is an error citing the
// line number.
inline std::vector<double> read_zscores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::vector<double> zs;
    std::string raw;
    std::size_t line_number = 0;
    bool header_allowed = true;
    while (std::getline(in, raw)) {
        ++line_number;
        const std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        double z;
        if (!detail::parse_double(line, z)) {
            if (header_allowed) {  // e.g. a "z" or "zscore" CSV header row
                header_allowed = false;
                continue;
            }
            throw ParseError("cannot parse z-score '" + line + "'", line_number);
        }
        header_allowed = false;
        if (!std::isfinite(z))
            throw ParseError("non-finite z-score '" + line + "'", line_number);
        zs.push_back(z);
    }
    return zs;
}

inline std::string fmt_g12(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

// Flat key-value JSON object; values must already be valid JSON tokens.
inline void write_estimates_json(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& fields) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "{\n";
    for (std::size_t i = 0; i < fields.size(); ++i)
        out << "  \"" << fields[i].first << "\": " << fields[i].second
            << (i + 1 < fields.size() ? ",\n" : "\n");
    out << "}\n";
}

inline void write_cases_tsv(const std::string& path, const std::vector<double>& zs,
                            const TestDecision& d) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "index\tz\tfdr\tflag\n";
    for (std::size_t i = 0; i < zs.size(); ++i)
        out << (i + 1) << '\t' << fmt_g12(zs[i]) << '\t' << fmt_g12(d.fdr_values[i])
            << '\t' << static_cast<int>(d.flags[i]) << '\n';
}

inline void write_curves_tsv(const std::string& path, const std::vector<CurveRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "z\tf0\tpi_f0\tone_minus_pi_f1\tf\tfdr\n";
    for (const auto& r : rows)
        out << fmt_g12(r.z) << '\t' << fmt_g12(r.f0) << '\t' << fmt_g12(r.pi_f0) << '\t'
            << fmt_g12(r.one_minus_pi_f1) << '\t' << fmt_g12(r.f) << '\t' << fmt_g12(r.fdr)
            << '\n';
}

inline void write_study_tsv(const std::string& path, const std::vector<StudyCell>& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << "variant\tpi\tn\treps\tfailures\tpi_hat_mean\tpi_hat_sd\tmu_hat_mean\t"
           "mu_hat_sd\tsigma_hat_mean\tsigma_hat_sd\tprtest_fdr\tprtest_fnr\t"
           "prtest_power\tprtest_risk\toracle_fdr\toracle_fnr\toracle_power\t"
           "oracle_risk\trisk_gap_mean\trisk_gap_se\n";
    for (const auto& c : table)
        out << variant_name(c.variant) << '\t' << fmt_g12(c.pi) << '\t' << c.n << '\t'
            << c.reps << '\t' << c.failures << '\t' << fmt_g12(c.pi_hat_mean) << '\t'
            << fmt_g12(c.pi_hat_sd) << '\t' << fmt_g12(c.mu_hat_mean) << '\t'
            << fmt_g12(c.mu_hat_sd) << '\t' << fmt_g12(c.sigma_hat_mean) << '\t'
            << fmt_g12(c.sigma_hat_sd) << '\t' << fmt_g12(c.prtest_mean.fdr) << '\t'
            << fmt_g12(c.prtest_mean.fnr) << '\t' << fmt_g12(c.prtest_mean.power) << '\t'
            << fmt_g12(c.prtest_mean.bayes_risk) << '\t' << fmt_g12(c.oracle_mean.fdr)
            << '\t' << fmt_g12(c.oracle_mean.fnr) << '\t' << fmt_g12(c.oracle_mean.power)
            << '\t' << fmt_g12(c.oracle_mean.bayes_risk) << '\t'
            << fmt_g12(c.risk_gap_mean) << '\t' << fmt_g12(c.risk_gap_se) << '\n';
}

}  // namespace prtest
