#include "msm_aipw/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "msm_aipw/errors.hpp"
#include "msm_aipw/rng.hpp"

namespace msm_aipw {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view cell, std::size_t line_no, std::string_view column) {
    double v = 0.0;
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw data_error("line " + std::to_string(line_no) + ": non-numeric value '" +
                         std::string(cell) + "' in column '" + std::string(column) + "'");
    }
    return v;
}

int parse_indicator(std::string_view cell, std::size_t line_no, std::string_view column) {
    double v = parse_number(cell, line_no, column);
    if (v != 0.0 && v != 1.0) {
        throw data_error("line " + std::to_string(line_no) + ": column '" + std::string(column) +
                         "' must be 0 or 1, got '" + std::string(cell) + "'");
    }
    return static_cast<int>(v);
}

void check_record(const SurvivalRecord& r, std::size_t p, std::size_t i) {
    const auto where = "record " + std::to_string(i);
    if (!std::isfinite(r.time)) throw data_error(where + ": non-finite follow-up time");
    if (r.time < 0.0) throw data_error(where + ": negative follow-up time");
    if (r.event != 0 && r.event != 1) throw data_error(where + ": event must be 0 or 1");
    if (r.treatment != 0 && r.treatment != 1) throw data_error(where + ": treatment must be 0 or 1");
    if (r.z.size() != p) throw data_error(where + ": covariate dimension mismatch");
    for (double v : r.z) {
        if (!std::isfinite(v)) throw data_error(where + ": non-finite covariate");
    }
}

}  // namespace

SurvivalRecord truncate_at(SurvivalRecord r, double tau) {
    if (r.time > tau) {
        r.time = tau;
        r.event = 0;
    }
    return r;
}

Dataset::Dataset(std::vector<SurvivalRecord> records, double tau) : records_(std::move(records)), tau_(tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw data_error("tau must be positive and finite");
    if (records_.empty()) throw data_error("empty dataset");
    p_ = records_.front().z.size();
    for (std::size_t i = 0; i < records_.size(); ++i) {
        check_record(records_[i], p_, i);
        records_[i] = truncate_at(std::move(records_[i]), tau_);
    }
    const auto treated = count_treated();
    if (treated == 0 || treated == records_.size()) {
        throw data_error("single-arm dataset: both treatment arms are required");
    }
}

std::size_t Dataset::count_treated() const {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                  [](const SurvivalRecord& r) { return r.treatment == 1; }));
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
    std::vector<SurvivalRecord> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(records_.at(i));
    return Dataset(std::move(out), tau_);
}

Dataset Dataset::with_swapped_treatment() const {
    auto out = records_;
    for (auto& r : out) r.treatment = 1 - r.treatment;
    return Dataset(std::move(out), tau_);
}

Dataset parse_dataset(const std::string& csv_text, double tau) {
    std::istringstream in(csv_text);
    std::string line;
    std::size_t line_no = 0;

    // Skip a UTF-8 byte order mark and leading blank lines.
    std::vector<std::string_view> header;
    std::string header_line;
    while (std::getline(in, header_line)) {
        ++line_no;
        if (line_no == 1 && header_line.rfind("\xEF\xBB\xBF", 0) == 0) header_line.erase(0, 3);
        if (!trim(header_line).empty()) break;
    }
    if (trim(header_line).empty()) throw data_error("empty file");
    header = split_commas(header_line);

    auto find_col = [&](std::string_view name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw data_error("missing column '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto c_time = find_col("time");
    const auto c_event = find_col("event");
    const auto c_treat = find_col("treatment");

    std::size_t p = 0;
    for (const auto& h : header) {
        if (h.size() > 1 && h[0] == 'z' &&
            std::all_of(h.begin() + 1, h.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            ++p;
        }
    }
    std::vector<std::size_t> c_z(p);
    for (std::size_t j = 0; j < p; ++j) c_z[j] = find_col("z" + std::to_string(j + 1));

    std::vector<SurvivalRecord> records;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_commas(line);
        if (cells.size() != header.size()) {
            throw data_error("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(cells.size()));
        }
        SurvivalRecord r;
        r.time = parse_number(cells[c_time], line_no, "time");
        if (r.time < 0.0) throw data_error("line " + std::to_string(line_no) + ": negative follow-up time");
        r.event = parse_indicator(cells[c_event], line_no, "event");
        r.treatment = parse_indicator(cells[c_treat], line_no, "treatment");
        r.z.resize(p);
        for (std::size_t j = 0; j < p; ++j) r.z[j] = parse_number(cells[c_z[j]], line_no, header[c_z[j]]);
        records.push_back(std::move(r));
    }
    if (records.empty()) throw data_error("empty file: no data rows");
    return Dataset(std::move(records), tau);
}

Dataset load_dataset(const std::filesystem::path& path, double tau) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str(), tau);
}

std::string format_dataset(const Dataset& data) {
    std::string out = "time,event,treatment";
    for (std::size_t j = 0; j < data.dim(); ++j) out += ",z" + std::to_string(j + 1);
    out += '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out += buf;
    };
    for (const auto& r : data.records()) {
        put(r.time);
        out += ',';
        out += r.event ? '1' : '0';
        out += ',';
        out += r.treatment ? '1' : '0';
        for (double v : r.z) {
            out += ',';
            put(v);
        }
        out += '\n';
    }
    return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write '" + path.string() + "'");
    out << format_dataset(data);
}

FoldAssignment::FoldAssignment(std::vector<int> fold_of, int k) : fold_of_(std::move(fold_of)), k_(k) {}

std::vector<std::size_t> FoldAssignment::members(int m) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of_.size(); ++i)
        if (fold_of_[i] == m) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(int m) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of_.size(); ++i)
        if (fold_of_[i] != m) out.push_back(i);
    return out;
}

FoldAssignment assign_folds(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("fold count must be at least 1");
    if (static_cast<std::size_t>(k) > n) throw std::invalid_argument("fold count exceeds sample size");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto eng = make_stream(seed, 0x666f6c64);  // "fold"
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(eng, i)]);
    std::vector<int> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
    return FoldAssignment(std::move(fold_of), k);
}

}  // namespace msm_aipw
