#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace msm_aipw {

// One observed subject.
struct SurvivalRecord {
    double time = 0.0;   // follow-up time X = min(T, C)
    int event = 0;       // 1 if the failure was observed
    int treatment = 0;   // binary treatment A
    std::vector<double> z;

    friend bool operator==(const SurvivalRecord&, const SurvivalRecord&) = default;
};

// A validated sample administratively censored at tau.
//
// Records with time > tau are stored as (tau, event = 0). Construction checks
// the record invariants and requires both treatment arms to be present.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<SurvivalRecord> records, double tau);

    const std::vector<SurvivalRecord>& records() const { return records_; }
    const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    double tau() const { return tau_; }
    std::size_t dim() const { return p_; }

    std::size_t count_treated() const;

    // True for a loss-to-follow-up censoring strictly before tau. Records
    // sitting at tau with event = 0 are administratively censored.
    bool is_censoring_event(std::size_t i) const {
        return records_[i].event == 0 && records_[i].time < tau_;
    }

    // Rows by index, with repetition allowed (bootstrap). The result must
    // still contain both arms.
    Dataset subset(std::span<const std::size_t> idx) const;

    // Same subjects with A replaced by 1 - A.
    Dataset with_swapped_treatment() const;

private:
    std::vector<SurvivalRecord> records_;
    double tau_ = 0.0;
    std::size_t p_ = 0;
};

// Applies administrative censoring at tau. Idempotent.
SurvivalRecord truncate_at(SurvivalRecord r, double tau);

// CSV with header `time,event,treatment,z1,...,zp`.
Dataset load_dataset(const std::filesystem::path& path, double tau);
Dataset parse_dataset(const std::string& csv_text, double tau);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
std::string format_dataset(const Dataset& data);

// Random partition of {0..n-1} into k folds whose sizes differ by at most one.
class FoldAssignment {
public:
    FoldAssignment(std::vector<int> fold_of, int k);

    int k() const { return k_; }
    std::size_t n() const { return fold_of_.size(); }
    int fold_of(std::size_t i) const { return fold_of_[i]; }  // 0-based
    const std::vector<int>& folds() const { return fold_of_; }
    std::vector<std::size_t> members(int m) const;
    std::vector<std::size_t> complement(int m) const;

private:
    std::vector<int> fold_of_;
    int k_;
};

FoldAssignment assign_folds(std::size_t n, int k, std::uint64_t seed);

}  // namespace msm_aipw
