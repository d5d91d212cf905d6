#include "chm/fluxframe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chm {

FluxFrame::FluxFrame(std::vector<std::int64_t> timestamps) : timestamps_(std::move(timestamps)) {
    for (std::size_t i = 1; i < timestamps_.size(); ++i)
        if (timestamps_[i] <= timestamps_[i - 1])
            throw std::invalid_argument("FluxFrame: timestamps not strictly increasing at row " +
                                        std::to_string(i));
}

bool FluxFrame::has_column(const std::string& name) const { return index_.count(name) > 0; }

const std::vector<double>& FluxFrame::col(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("FluxFrame: no column '" + name + "'");
    return columns_[it->second];
}

const std::vector<bool>* FluxFrame::quality(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("FluxFrame: no column '" + name + "'");
    const auto& q = quality_[it->second];
    return q.empty() ? nullptr : &q;
}

void FluxFrame::add_column(const std::string& name, std::vector<double> values) {
    add_column(name, std::move(values), {});
}

void FluxFrame::add_column(const std::string& name, std::vector<double> values,
                           std::vector<bool> quality) {
    if (values.size() != timestamps_.size())
        throw std::invalid_argument("FluxFrame: column '" + name + "' length mismatch");
    if (!quality.empty() && quality.size() != timestamps_.size())
        throw std::invalid_argument("FluxFrame: quality mask for '" + name + "' length mismatch");
    if (index_.count(name)) throw std::invalid_argument("FluxFrame: duplicate column '" + name + "'");
    index_[name] = names_.size();
    names_.push_back(name);
    columns_.push_back(std::move(values));
    quality_.push_back(std::move(quality));
}

void FluxFrame::validate() const {
    if (timestamps_.empty()) throw std::invalid_argument("FluxFrame: empty frame");
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const auto& col = columns_[c];
        const auto& q = quality_[c];
        for (std::size_t i = 0; i < col.size(); ++i) {
            const bool measured = q.empty() ? true : static_cast<bool>(q[i]);
            if (measured && !std::isfinite(col[i]))
                throw std::invalid_argument("FluxFrame: non-finite value in measured row " +
                                            std::to_string(i) + " of column '" + names_[c] + "'");
        }
    }
}

FluxFrame FluxFrame::take_rows(const std::vector<std::size_t>& idx) const {
    std::vector<std::int64_t> ts(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) ts[r] = timestamps_[idx[r]];
    FluxFrame out(std::move(ts));
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        std::vector<double> vals(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) vals[r] = columns_[c][idx[r]];
        std::vector<bool> q;
        if (!quality_[c].empty()) {
            q.resize(idx.size());
            for (std::size_t r = 0; r < idx.size(); ++r) q[r] = quality_[c][idx[r]];
        }
        out.add_column(names_[c], std::move(vals), std::move(q));
    }
    return out;
}

TreatmentTransform TreatmentTransform::affine(double t_ref, double scale) {
    if (scale == 0.0) throw std::invalid_argument("TreatmentTransform: zero scale");
    TreatmentTransform t;
    t.kind = Kind::AffineScale;
    t.t_ref = t_ref;
    t.scale = scale;
    return t;
}

TreatmentTransform TreatmentTransform::precomputed(std::string column) {
    TreatmentTransform t;
    t.kind = Kind::Precomputed;
    t.column = std::move(column);
    return t;
}

std::vector<double> TreatmentTransform::apply(const FluxFrame& frame, const std::string& t_col) const {
    switch (kind) {
    case Kind::Identity:
        return frame.col(t_col);
    case Kind::AffineScale: {
        std::vector<double> out = frame.col(t_col);
        for (double& v : out) v = (v - t_ref) / scale;
        return out;
    }
    case Kind::Precomputed:
        return frame.col(column);
    }
    throw std::logic_error("TreatmentTransform: bad kind");
}

void RoleSpec::validate_for(const FluxFrame& frame) const {
    auto require = [&frame](const std::string& name) {
        if (!frame.has_column(name))
            throw std::invalid_argument("RoleSpec: column '" + name + "' not in frame");
    };
    require(y);
    require(t);
    for (const auto& c : x) require(c);
    for (const auto& c : w) require(c);
    if (f.kind == TreatmentTransform::Kind::Precomputed) require(f.column);

    std::set<std::string> xs(x.begin(), x.end()), ws(w.begin(), w.end());
    for (const auto& c : xs)
        if (ws.count(c)) throw std::invalid_argument("RoleSpec: column '" + c + "' in both x and w");
    auto in_controls = [&](const std::string& name) { return xs.count(name) || ws.count(name); };
    if (in_controls(y)) throw std::invalid_argument("RoleSpec: outcome '" + y + "' also in controls");
    if (in_controls(t)) throw std::invalid_argument("RoleSpec: treatment '" + t + "' also in controls");
}

FluxFrame filter_measured(const FluxFrame& frame, const std::vector<std::string>& required) {
    std::vector<std::size_t> keep;
    keep.reserve(frame.n_rows());
    std::vector<const std::vector<bool>*> masks;
    for (const auto& name : required) masks.push_back(frame.quality(name));
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
        bool ok = true;
        for (const auto* m : masks)
            if (m && !(*m)[i]) {
                ok = false;
                break;
            }
        if (ok) keep.push_back(i);
    }
    return frame.take_rows(keep);
}

std::pair<FluxFrame, FluxFrame> split_by_year(const FluxFrame& frame,
                                              const std::set<int>& train_years,
                                              const std::set<int>& test_years) {
    for (int y : train_years)
        if (test_years.count(y))
            throw std::invalid_argument("split_by_year: year " + std::to_string(y) +
                                        " in both train and test sets");
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
        const int y = FluxFrame::year_of(frame.timestamps()[i]);
        if (train_years.count(y))
            train_idx.push_back(i);
        else if (test_years.count(y))
            test_idx.push_back(i);
    }
    return {frame.take_rows(train_idx), frame.take_rows(test_idx)};
}

} // namespace chm
