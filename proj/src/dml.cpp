#include "chm/dml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "chm/rng.hpp"

namespace chm::dml {

Design build_design(const FluxFrame& frame, const RoleSpec& roles) {
    roles.validate_for(frame);
    Design d;
    d.y = frame.col(roles.y);
    d.ft = roles.f.apply(frame, roles.t);
    d.x_cols = roles.x;
    d.xw_cols = roles.x;
    d.xw_cols.insert(d.xw_cols.end(), roles.w.begin(), roles.w.end());
    if (d.xw_cols.empty())
        throw std::invalid_argument("build_design: no control columns (x and w both empty)");
    std::vector<const std::vector<double>*> cols;
    for (const auto& c : d.xw_cols) cols.push_back(&frame.col(c));
    d.xw = Matrix::from_columns(cols);
    cols.clear();
    for (const auto& c : d.x_cols) cols.push_back(&frame.col(c));
    d.x = cols.empty() ? Matrix(frame.n_rows(), 0) : Matrix::from_columns(cols);
    return d;
}

PartialOutResult cross_fit(const Matrix& xw, const std::vector<double>& y,
                           const std::vector<double>& ft, const learn::LearnerSpec& y_learner,
                           const learn::LearnerSpec& t_learner, int k_folds, std::uint64_t seed,
                           FoldScheme scheme, const std::vector<int>* fold_override) {
    const std::size_t n = xw.rows();
    if (k_folds < 2) throw std::invalid_argument("cross_fit: k_folds must be >= 2");
    if (n < 2 * static_cast<std::size_t>(k_folds))
        throw std::invalid_argument("cross_fit: too few rows for " + std::to_string(k_folds) +
                                    " folds");
    if (y.size() != n || ft.size() != n) throw std::invalid_argument("cross_fit: length mismatch");

    PartialOutResult po;
    po.fold.resize(n);
    if (fold_override) {
        if (fold_override->size() != n)
            throw std::invalid_argument("cross_fit: fold override length mismatch");
        po.fold = *fold_override;
    } else if (scheme == FoldScheme::Shuffled) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        Rng rng(derive_seed(seed, "folds", 0));
        rng.shuffle(idx);
        std::size_t pos = 0;
        for (int k = 0; k < k_folds; ++k) {
            std::size_t size = n / k_folds + (static_cast<std::size_t>(k) < n % k_folds ? 1 : 0);
            for (std::size_t c = 0; c < size; ++c) po.fold[idx[pos++]] = k;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            po.fold[i] = static_cast<int>(i * static_cast<std::size_t>(k_folds) / n);
    }

    po.y_res.resize(n);
    po.t_res.resize(n);
    po.y_models.resize(k_folds);
    po.t_models.resize(k_folds);

    for (int k = 0; k < k_folds; ++k) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < n; ++i)
            (po.fold[i] == k ? test_idx : train_idx).push_back(i);
        if (train_idx.size() < 2 || test_idx.empty())
            throw std::invalid_argument("cross_fit: degenerate fold " + std::to_string(k));

        Matrix Xtr = xw.take_rows(train_idx), Xte = xw.take_rows(test_idx);
        std::vector<double> ytr(train_idx.size()), ttr(train_idx.size());
        for (std::size_t r = 0; r < train_idx.size(); ++r) {
            ytr[r] = y[train_idx[r]];
            ttr[r] = ft[train_idx[r]];
        }

        learn::LearnerSpec ys = y_learner, ts = t_learner;
        ys.seed = derive_seed(y_learner.seed, "xfit-y", static_cast<std::uint64_t>(k));
        ts.seed = derive_seed(t_learner.seed, "xfit-t", static_cast<std::uint64_t>(k));
        try {
            po.y_models[k] = learn::fit(ys, Xtr, ytr);
            po.t_models[k] = learn::fit(ts, Xtr, ttr);
        } catch (const std::exception& e) {
            throw std::runtime_error("cross_fit: first-stage failure in fold " + std::to_string(k) +
                                     ": " + e.what());
        }

        const auto yp = po.y_models[k]->predict_raw(Xte);
        const auto tp = po.t_models[k]->predict_raw(Xte);
        for (std::size_t r = 0; r < test_idx.size(); ++r) {
            po.y_res[test_idx[r]] = y[test_idx[r]] - yp[r];
            po.t_res[test_idx[r]] = ft[test_idx[r]] - tp[r];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        po.y_res_mean += po.y_res[i];
        po.t_res_mean += po.t_res[i];
    }
    po.y_res_mean /= static_cast<double>(n);
    po.t_res_mean /= static_cast<double>(n);
    return po;
}

PartialOutResult cross_fit(const FluxFrame& frame, const RoleSpec& roles,
                           const learn::LearnerSpec& y_learner,
                           const learn::LearnerSpec& t_learner, int k_folds, std::uint64_t seed,
                           FoldScheme scheme) {
    Design d = build_design(frame, roles);
    auto po = cross_fit(d.xw, d.y, d.ft, y_learner, t_learner, k_folds, seed, scheme);
    po.xw_cols = d.xw_cols;
    po.x_cols = d.x_cols;
    return po;
}

ConstantEffect estimate_constant_effect(const PartialOutResult& po) {
    const std::size_t n = po.t_res.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += po.t_res[i] * po.y_res[i];
        den += po.t_res[i] * po.t_res[i];
    }
    if (den <= 0.0)
        throw std::runtime_error(
            "estimate_constant_effect: residualized treatment has zero variance "
            "(treatment fully explained by controls)");
    ConstantEffect e;
    e.theta = num / den;
    double meat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = po.y_res[i] - e.theta * po.t_res[i];
        meat += po.t_res[i] * po.t_res[i] * u * u;
    }
    e.std_error = std::sqrt(meat) / den;
    e.ci_lo = e.theta - 1.96 * e.std_error;
    e.ci_hi = e.theta + 1.96 * e.std_error;
    e.n_used = n;
    return e;
}

HeterogeneousEffect estimate_heterogeneous_effect(const PartialOutResult& po, const Matrix& x,
                                                  const learn::LearnerSpec& final_learner,
                                                  double weight_floor) {
    const std::size_t n = po.t_res.size();
    if (x.rows() != n) throw std::invalid_argument("estimate_heterogeneous_effect: x row mismatch");
    if (x.cols() == 0)
        throw std::invalid_argument("estimate_heterogeneous_effect: x has no columns");

    if (weight_floor <= 0.0) {
        double mean = 0.0, var = 0.0;
        for (double t : po.t_res) mean += t;
        mean /= static_cast<double>(n);
        for (double t : po.t_res) var += (t - mean) * (t - mean);
        var /= static_cast<double>(n);
        weight_floor = 1e-3 * std::sqrt(var);
    }
    if (weight_floor <= 0.0)
        throw std::runtime_error("estimate_heterogeneous_effect: degenerate treatment residuals");

    std::vector<double> pseudo(n), w(n);
    std::size_t floored = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = po.t_res[i];
        const double mag = std::abs(t);
        const double tc = (t < 0.0 ? -1.0 : 1.0) * std::max(mag, weight_floor);
        if (mag < weight_floor) ++floored;
        pseudo[i] = po.y_res[i] / tc;
        w[i] = tc * tc;
    }
    if (floored == n)
        throw std::runtime_error(
            "estimate_heterogeneous_effect: all residualized treatments below floor "
            "(treatment unresidualizable)");

    HeterogeneousEffect h;
    h.model = learn::fit(final_learner, x, pseudo, &w);
    h.x_cols = po.x_cols;
    h.weight_floor = weight_floor;
    return h;
}

std::vector<double> Effect::evaluate(const Matrix& x, std::size_t n) const {
    if (constant) return std::vector<double>(n, constant->theta);
    if (!heterogeneous) throw std::logic_error("Effect: empty");
    if (x.rows() != n) throw std::invalid_argument("Effect: x rows mismatch");
    return heterogeneous->model->predict_raw(x);
}

namespace {
std::vector<double> fold_ensemble_mean(const std::vector<learn::ModelPtr>& models,
                                       const Matrix& features) {
    std::vector<double> mean(features.rows(), 0.0);
    for (const auto& m : models) {
        const auto p = m->predict_raw(features);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i];
    }
    const double k = static_cast<double>(models.size());
    for (double& v : mean) v /= k;
    return mean;
}

Matrix frame_matrix(const FluxFrame& frame, const std::vector<std::string>& cols) {
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& c : cols) ptrs.push_back(&frame.col(c));
    return ptrs.empty() ? Matrix(frame.n_rows(), 0) : Matrix::from_columns(ptrs);
}
} // namespace

std::vector<double> plugin_g(const PartialOutResult& po, const Effect& effect, const Matrix& xw,
                             const Matrix& x) {
    const auto ey = fold_ensemble_mean(po.y_models, xw);
    const auto et = fold_ensemble_mean(po.t_models, xw);
    const auto theta = effect.evaluate(x, xw.rows());
    std::vector<double> g(xw.rows());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = ey[i] - theta[i] * et[i];
    return g;
}

GEstimator GEstimator::plug_in(const PartialOutResult& po) {
    GEstimator g;
    g.kind = Kind::PlugIn;
    g.y_models = po.y_models;
    g.t_models = po.t_models;
    g.xw_cols = po.xw_cols;
    g.x_cols = po.x_cols;
    return g;
}

GEstimator refit_g(const FluxFrame& frame, const RoleSpec& roles, const Effect& effect,
                   const learn::LearnerSpec& learner, const std::vector<std::string>& extra_predictors,
                   Composition composition) {
    Design d = build_design(frame, roles);
    const std::size_t n = frame.n_rows();
    const auto theta = effect.evaluate(d.x, n);

    std::vector<double> target(n);
    if (composition == Composition::Additive) {
        for (std::size_t i = 0; i < n; ++i) target[i] = d.y[i] - theta[i] * d.ft[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            target[i] = d.y[i] / std::exp(theta[i] * d.ft[i]);
            if (!std::isfinite(target[i]))
                throw std::runtime_error("refit_g: non-finite refit target at row " +
                                         std::to_string(i) + " (exp overflow/underflow)");
        }
    }

    std::vector<std::string> cols = d.xw_cols;
    for (const auto& c : extra_predictors)
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);

    GEstimator g;
    g.kind = GEstimator::Kind::Refit;
    g.refit_cols = cols;
    g.refit_model = learn::fit(learner, frame_matrix(frame, cols), target);
    return g;
}

std::vector<double> g_series(const HybridModel& model, const FluxFrame& frame) {
    if (model.g.kind == GEstimator::Kind::PlugIn) {
        PartialOutResult po;
        po.y_models = model.g.y_models;
        po.t_models = model.g.t_models;
        const Matrix xw = frame_matrix(frame, model.g.xw_cols);
        const Matrix x = frame_matrix(frame, model.g.x_cols);
        return plugin_g(po, model.effect, xw, x);
    }
    return model.g.refit_model->predict_raw(frame_matrix(frame, model.g.refit_cols));
}

std::vector<double> effect_series(const HybridModel& model, const FluxFrame& frame) {
    const std::vector<std::string>& xc =
        model.effect.heterogeneous ? model.effect.heterogeneous->x_cols : std::vector<std::string>{};
    return model.effect.evaluate(frame_matrix(frame, xc), frame.n_rows());
}

std::vector<double> predict_hybrid(const HybridModel& model, const FluxFrame& frame) {
    const auto theta = effect_series(model, frame);
    const auto ft = model.f.apply(frame, model.t_col);
    const auto g = g_series(model, frame);
    std::vector<double> out(frame.n_rows());
    if (model.composition == Composition::Additive) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = theta[i] * ft[i] + g[i];
    } else {
        if (model.g.kind != GEstimator::Kind::Refit)
            throw std::logic_error("predict_hybrid: multiplicative composition requires a refit g");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] * std::exp(theta[i] * ft[i]);
    }
    return out;
}

DmlSummary make_summary(const PartialOutResult& po, const ConstantEffect& eff) {
    DmlSummary s;
    s.effect = eff;
    s.k_folds = static_cast<int>(po.y_models.size());
    s.n_rows = po.y_res.size();
    s.y_res_mean = po.y_res_mean;
    s.t_res_mean = po.t_res_mean;
    // corr(y_res - theta*t_res, t_res): reported diagnostic for the moment
    // condition E[eta*eps | X,W] = 0
    const std::size_t n = po.y_res.size();
    double mu = 0.0, mt = 0.0;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = po.y_res[i] - eff.theta * po.t_res[i];
        mu += u[i];
        mt += po.t_res[i];
    }
    mu /= static_cast<double>(n);
    mt /= static_cast<double>(n);
    double suu = 0.0, stt = 0.0, sut = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        suu += (u[i] - mu) * (u[i] - mu);
        stt += (po.t_res[i] - mt) * (po.t_res[i] - mt);
        sut += (u[i] - mu) * (po.t_res[i] - mt);
    }
    s.residual_corr = (suu > 0 && stt > 0) ? sut / std::sqrt(suu * stt) : 0.0;
    return s;
}

std::string format_summary(const DmlSummary& s) {
    std::ostringstream o;
    o.precision(17);
    o << "chm-dml-summary v1\n";
    o << "theta " << s.effect.theta << "\n";
    o << "std_error " << s.effect.std_error << "\n";
    o << "ci95 " << s.effect.ci_lo << " " << s.effect.ci_hi << "\n";
    o << "n_used " << s.effect.n_used << "\n";
    o << "k_folds " << s.k_folds << "\n";
    o << "n_rows " << s.n_rows << "\n";
    o << "y_res_mean " << s.y_res_mean << "\n";
    o << "t_res_mean " << s.t_res_mean << "\n";
    o << "residual_corr " << s.residual_corr << "\n";
    return o.str();
}

DmlSummary parse_summary(const std::string& text) {
    std::istringstream in(text);
    std::string header, v;
    std::getline(in, header);
    if (header != "chm-dml-summary v1")
        throw std::runtime_error("parse_summary: bad header '" + header + "'");
    DmlSummary s;
    std::string key;
    while (in >> key) {
        if (key == "theta")
            in >> s.effect.theta;
        else if (key == "std_error")
            in >> s.effect.std_error;
        else if (key == "ci95")
            in >> s.effect.ci_lo >> s.effect.ci_hi;
        else if (key == "n_used")
            in >> s.effect.n_used;
        else if (key == "k_folds")
            in >> s.k_folds;
        else if (key == "n_rows")
            in >> s.n_rows;
        else if (key == "y_res_mean")
            in >> s.y_res_mean;
        else if (key == "t_res_mean")
            in >> s.t_res_mean;
        else if (key == "residual_corr")
            in >> s.residual_corr;
        else
            throw std::runtime_error("parse_summary: unknown key '" + key + "'");
    }
    return s;
}

} // namespace chm::dml
