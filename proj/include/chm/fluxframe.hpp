#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chm {

// Columnar half-hourly time-series table of meteorological drivers and
// fluxes. Timestamps are YYYYMMDDHHMM integers (FLUXNET convention) and must
// be strictly increasing. Column units by convention: TA degC, SW_IN/SW_POT
// W m-2, VPD hPa, NEE/RECO/GPP umol CO2 m-2 s-1. A per-column quality mask
// marks measured rows (true = measured); columns without a mask count as
// fully measured. Missing values are stored as NaN and are only legal on
// rows whose mask is false. Frames are immutable after construction; all
// operations return new frames.
class FluxFrame {
public:
    FluxFrame() = default;
    explicit FluxFrame(std::vector<std::int64_t> timestamps);

    std::size_t n_rows() const { return timestamps_.size(); }
    const std::vector<std::int64_t>& timestamps() const { return timestamps_; }
    const std::vector<std::string>& column_names() const { return names_; }
    bool has_column(const std::string& name) const;

    const std::vector<double>& col(const std::string& name) const;
    // Quality mask; nullptr when the column has no mask (all rows measured).
    const std::vector<bool>* quality(const std::string& name) const;

    void add_column(const std::string& name, std::vector<double> values);
    void add_column(const std::string& name, std::vector<double> values, std::vector<bool> quality);

    // Checks lengths, timestamp monotonicity and the NaN-only-on-unmeasured rule.
    void validate() const;

    FluxFrame take_rows(const std::vector<std::size_t>& idx) const;

    static int year_of(std::int64_t timestamp) { return static_cast<int>(timestamp / 100000000LL); }

private:
    std::vector<std::int64_t> timestamps_;
    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<double>> columns_;
    std::vector<std::vector<bool>> quality_; // empty vector = no mask
};

// f applied to the treatment column before residualization.
struct TreatmentTransform {
    enum class Kind { Identity, AffineScale, Precomputed };
    Kind kind = Kind::Identity;
    double t_ref = 15.0; // AffineScale: (T - t_ref) / scale
    double scale = 10.0;
    std::string column; // Precomputed: externally supplied f(T) series

    static TreatmentTransform identity() { return {}; }
    static TreatmentTransform affine(double t_ref, double scale);
    static TreatmentTransform precomputed(std::string column);

    std::vector<double> apply(const FluxFrame& frame, const std::string& t_col) const;
};

// Assignment of columns to causal roles. y is the outcome, t the treatment,
// x the effect modifiers, w additional confounders/mediators.
struct RoleSpec {
    std::string y;
    std::string t;
    std::vector<std::string> x;
    std::vector<std::string> w;
    TreatmentTransform f;

    void validate_for(const FluxFrame& frame) const;
};

// Rows retained iff the quality mask is true for every required column.
FluxFrame filter_measured(const FluxFrame& frame, const std::vector<std::string>& required);

// Row membership decided by calendar year; the year sets must be disjoint.
std::pair<FluxFrame, FluxFrame> split_by_year(const FluxFrame& frame,
                                              const std::set<int>& train_years,
                                              const std::set<int>& test_years);

} // namespace chm
