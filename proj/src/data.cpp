// SPDX-License-Identifier: MIT
#include "tlvar/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tlvar/errors.hpp"

namespace tlvar {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool is_missing(const std::string& field) {
    if (field.empty()) return true;
    std::string lower = field;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "na" || lower == "nan" || lower == "n/a";
}

double parse_number(const std::string& field, std::size_t row, std::size_t col) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw data_error("csv: non-numeric cell '" + field + "' at data row " +
                         std::to_string(row + 1) + ", column " + std::to_string(col + 1));
    return value;
}

int diff_order(int code) {
    switch (code) {
        case 1:
        case 3:
            return 1;
        case 2:
        case 4:
            return 2;
        default:
            throw std::invalid_argument("preprocess: transform code must be in {1,2,3,4}");
    }
}

}  // namespace

Panel load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("csv: cannot open '" + path + "'");

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) lines.push_back(line);
    }
    if (lines.empty()) throw data_error("csv: '" + path + "' is empty");

    const std::vector<std::string> header = split_fields(lines.front());
    if (header.size() < 2)
        throw data_error("csv: '" + path + "' needs a time column and at least one variable");
    const std::size_t ncol = header.size();
    const std::size_t nvar = ncol - 1;
    if (lines.size() < 2) throw data_error("csv: '" + path + "' has a header but no data rows");

    // Cells as optional doubles; missing cells allowed only in a leading block.
    std::vector<std::vector<double>> values;   // per data row, nvar entries
    std::vector<bool> has_missing;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::vector<std::string> fields = split_fields(lines[r]);
        if (fields.size() != ncol)
            throw data_error("csv: row " + std::to_string(r) + " of '" + path + "' has " +
                             std::to_string(fields.size()) + " cells, expected " +
                             std::to_string(ncol));
        std::vector<double> row(nvar, 0.0);
        bool missing = false;
        for (std::size_t c = 1; c < ncol; ++c) {
            if (is_missing(fields[c]))
                missing = true;
            else
                row[c - 1] = parse_number(fields[c], r - 1, c);
        }
        // A row mixing missing and present cells is fine only while leading:
        // re-scan below once the first complete row is known.
        values.push_back(std::move(row));
        has_missing.push_back(missing);
    }

    std::size_t start = 0;
    while (start < values.size() && has_missing[start]) ++start;
    if (start == values.size())
        throw data_error("csv: '" + path + "' has no row with all variables present");
    for (std::size_t r = start; r < values.size(); ++r)
        if (has_missing[r])
            throw data_error("csv: missing cell at data row " + std::to_string(r + 1) +
                             " of '" + path + "' after the aligned start");

    const std::size_t T = values.size() - start;
    Panel panel;
    panel.id = path;
    panel.names.assign(header.begin() + 1, header.end());
    panel.Y.resize(static_cast<Eigen::Index>(nvar), static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t i = 0; i < nvar; ++i)
            panel.Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) =
                values[start + t][i];
    return panel;
}

PreprocessResult preprocess(const Panel& raw, const TransformSpec& spec) {
    const Eigen::Index N = raw.Y.rows(), T = raw.Y.cols();
    if (static_cast<Eigen::Index>(spec.codes.size()) != N)
        throw std::invalid_argument("preprocess: need one transform code per variable");

    int max_order = 0;
    for (int code : spec.codes) max_order = std::max(max_order, diff_order(code));
    if (T <= max_order)
        throw data_error("preprocess: series too short for differencing order " +
                         std::to_string(max_order));

    const auto var_name = [&](Eigen::Index i) {
        return i < static_cast<Eigen::Index>(raw.names.size()) && !raw.names[i].empty()
                   ? raw.names[static_cast<std::size_t>(i)]
                   : "variable " + std::to_string(i + 1);
    };

    const Eigen::Index out_T = T - max_order;
    PreprocessResult res;
    res.panel.id = raw.id;
    res.panel.names = raw.names;
    res.panel.Y.resize(N, out_T);
    res.info.codes = spec.codes;
    res.info.mean = Eigen::VectorXd::Zero(N);
    res.info.scale = Eigen::VectorXd::Ones(N);
    res.info.rows_dropped = max_order;

    for (Eigen::Index i = 0; i < N; ++i) {
        const int code = spec.codes[static_cast<std::size_t>(i)];
        Eigen::VectorXd series = raw.Y.row(i).transpose();
        if (code == 3 || code == 4) {
            if ((series.array() <= 0.0).any())
                throw data_error("preprocess: log transform needs positive values for " +
                                 var_name(i));
            series = series.array().log().matrix();
        }
        const int order = diff_order(code);
        for (int d = 0; d < order; ++d)
            series = (series.tail(series.size() - 1) - series.head(series.size() - 1)).eval();
        // End-align: keep the trailing out_T values so every variable covers
        // the same time span regardless of its differencing order.
        Eigen::VectorXd aligned = series.tail(out_T);

        if (spec.standardize) {
            const double mean = aligned.mean();
            aligned.array() -= mean;
            const double ss = aligned.squaredNorm();
            const double sd =
                out_T > 1 ? std::sqrt(ss / static_cast<double>(out_T - 1)) : 0.0;
            res.info.mean(i) = mean;
            if (sd > 0.0) {
                aligned /= sd;
                res.info.scale(i) = sd;
            }  // constant series stays identically zero
        }
        res.panel.Y.row(i) = aligned.transpose();
    }
    return res;
}

}  // namespace tlvar
