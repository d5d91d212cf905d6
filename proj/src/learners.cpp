#include "chm/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "chm/detail/models.hpp"
#include "chm/kernels.hpp"
#include "chm/mlp_core.hpp"
#include "chm/rng.hpp"

namespace chm::learn {

LearnerSpec LearnerSpec::linear(std::uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::Linear;
    s.seed = seed;
    return s;
}
LearnerSpec LearnerSpec::gradient_boosting(GbtConfig cfg, std::uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::Gbt;
    s.gbt = cfg;
    s.seed = seed;
    return s;
}
LearnerSpec LearnerSpec::random_forest(RfConfig cfg, std::uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::Rf;
    s.rf = cfg;
    s.seed = seed;
    return s;
}
LearnerSpec LearnerSpec::multilayer_perceptron(MlpConfig cfg, std::uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::Mlp;
    s.mlp = cfg;
    s.seed = seed;
    return s;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               const AdamConfig& hyper) {
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw std::invalid_argument("adam_step: size mismatch");
    const long t = ++state.step;
    const double lr = hyper.lr * std::pow(hyper.lr_decay_rate,
                                          static_cast<double>(t / hyper.lr_decay_every));
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        state.m[k] = hyper.beta1 * state.m[k] + (1.0 - hyper.beta1) * grad[k];
        state.v[k] = hyper.beta2 * state.v[k] + (1.0 - hyper.beta2) * grad[k] * grad[k];
        const double mhat = state.m[k] / bc1;
        const double vhat = state.v[k] / bc2;
        params[k] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

namespace {

void validate_inputs(const Matrix& X, const std::vector<double>& y,
                     const std::vector<double>* weights) {
    if (X.rows() < 2) throw std::invalid_argument("fit: need at least 2 rows");
    if (X.cols() < 1) throw std::invalid_argument("fit: need at least 1 feature");
    if (y.size() != X.rows()) throw std::invalid_argument("fit: target length mismatch");
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j)
            if (!std::isfinite(X(i, j)))
                throw std::invalid_argument("fit: non-finite feature at row " + std::to_string(i));
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!std::isfinite(y[i]))
            throw std::invalid_argument("fit: non-finite target at row " + std::to_string(i));
    if (weights) {
        if (weights->size() != X.rows()) throw std::invalid_argument("fit: weight length mismatch");
        double sum = 0.0;
        for (double w : *weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("fit: negative or NaN weight");
            sum += w;
        }
        if (sum <= 0.0) throw std::invalid_argument("fit: all weights zero");
    }
}

bool weighted_target_variance_zero(const std::vector<double>& y, const std::vector<double>& w) {
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        wsum += w[i];
        mean += w[i] * y[i];
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) var += w[i] * (y[i] - mean) * (y[i] - mean);
    return var / wsum < 1e-24;
}

// ----------------------------------------------------------------- linear --

// Weighted least squares with intercept via normal equations + Cholesky.
// A tiny escalating ridge is added only if the system is not positive
// definite (collinear features).
std::vector<double> solve_wls(const Matrix& X, const std::vector<double>& y,
                              const std::vector<double>& w) {
    const std::size_t n = X.rows(), p = X.cols() + 1;
    std::vector<double> xtx(p * p, 0.0), xty(p, 0.0), xi(p);
    for (std::size_t i = 0; i < n; ++i) {
        xi[0] = 1.0;
        for (std::size_t j = 0; j < X.cols(); ++j) xi[j + 1] = X(i, j);
        const double wi = w[i];
        for (std::size_t a = 0; a < p; ++a) {
            xty[a] += wi * xi[a] * y[i];
            for (std::size_t b = a; b < p; ++b) xtx[a * p + b] += wi * xi[a] * xi[b];
        }
    }
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < a; ++b) xtx[a * p + b] = xtx[b * p + a];

    double trace = 0.0;
    for (std::size_t a = 0; a < p; ++a) trace += xtx[a * p + a];
    double ridge = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::vector<double> L = xtx;
        if (ridge > 0.0)
            for (std::size_t a = 0; a < p; ++a) L[a * p + a] += ridge;
        bool ok = true;
        for (std::size_t a = 0; a < p && ok; ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                double s = L[a * p + b];
                for (std::size_t k = 0; k < b; ++k) s -= L[a * p + k] * L[b * p + k];
                if (a == b) {
                    if (s <= 0.0) {
                        ok = false;
                        break;
                    }
                    L[a * p + a] = std::sqrt(s);
                } else {
                    L[a * p + b] = s / L[b * p + b];
                }
            }
        }
        if (!ok) {
            ridge = ridge == 0.0 ? 1e-12 * std::max(trace, 1.0) : ridge * 100.0;
            continue;
        }
        // forward/back substitution
        std::vector<double> z(p), beta(p);
        for (std::size_t a = 0; a < p; ++a) {
            double s = xty[a];
            for (std::size_t k = 0; k < a; ++k) s -= L[a * p + k] * z[k];
            z[a] = s / L[a * p + a];
        }
        for (std::size_t a = p; a-- > 0;) {
            double s = z[a];
            for (std::size_t k = a + 1; k < p; ++k) s -= L[k * p + a] * beta[k];
            beta[a] = s / L[a * p + a];
        }
        return beta;
    }
    throw std::runtime_error("linear fit: singular normal equations");
}

ModelPtr fit_linear(const Matrix& X, const std::vector<double>& y, const std::vector<double>& w) {
    auto model = std::make_shared<LinearModel>();
    model->beta = solve_wls(X, y, w);
    auto pred = model->predict_raw(X);
    double wsum = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        loss += w[i] * (pred[i] - y[i]) * (pred[i] - y[i]);
        wsum += w[i];
    }
    model->mutable_diag().train_loss = loss / wsum;
    model->mutable_diag().zero_variance_target = weighted_target_variance_zero(y, w);
    return model;
}

// ------------------------------------------------------------------ trees --

ModelPtr fit_rf(const RfConfig& cfg, std::uint64_t seed, const Matrix& X,
                const std::vector<double>& y, const std::vector<double>& w) {
    if (cfg.n_trees <= 0) throw std::invalid_argument("rf: n_trees must be positive");
    auto model = std::make_shared<RfModel>();
    model->n_features = X.cols();
    model->trees.resize(cfg.n_trees);
    const std::size_t n = X.rows();

    TreeGrowConfig grow{cfg.max_depth, cfg.min_samples_leaf, cfg.feature_subsample};
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng rng(derive_seed(seed, "rf-tree", static_cast<std::uint64_t>(t)));
        std::vector<std::uint32_t> rows;
        std::vector<double> tw;
        if (cfg.bootstrap) {
            std::vector<std::uint32_t> counts(n, 0);
            for (std::size_t d = 0; d < n; ++d) ++counts[rng.uniform_int(n)];
            tw.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[i] == 0) continue;
                rows.push_back(static_cast<std::uint32_t>(i));
                tw[i] = w[i] * counts[i];
            }
        } else {
            rows.resize(n);
            std::iota(rows.begin(), rows.end(), 0u);
            tw = w;
        }
        model->trees[t] = grow_tree(X, y, tw, rows, grow, rng);
    }

    auto pred = model->predict_raw(X);
    double wsum = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        loss += w[i] * (pred[i] - y[i]) * (pred[i] - y[i]);
        wsum += w[i];
    }
    model->mutable_diag().train_loss = loss / wsum;
    model->mutable_diag().zero_variance_target = weighted_target_variance_zero(y, w);
    return model;
}

ModelPtr fit_gbt(const GbtConfig& cfg, std::uint64_t seed, const Matrix& X,
                 const std::vector<double>& y, const std::vector<double>& w) {
    if (cfg.n_stages <= 0) throw std::invalid_argument("gbt: n_stages must be positive");
    if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0))
        throw std::invalid_argument("gbt: learning_rate must be in (0,1]");
    auto model = std::make_shared<GbtModel>();
    model->n_features = X.cols();
    model->learning_rate = cfg.learning_rate;
    const std::size_t n = X.rows();

    double wsum = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w[i];
        wy += w[i] * y[i];
    }
    model->f0 = wy / wsum;

    std::vector<double> F(n, model->f0), resid(n);
    Rng rng(derive_seed(seed, "gbt", 0));
    TreeGrowConfig grow{cfg.max_depth, cfg.min_samples_leaf, 1.0};
    std::vector<std::uint32_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0u);

    auto& stage_loss = model->mutable_diag().stage_train_loss;
    stage_loss.reserve(cfg.n_stages);
    for (int s = 0; s < cfg.n_stages; ++s) {
        for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - F[i];
        std::vector<std::uint32_t> rows;
        if (cfg.subsample < 1.0) {
            const std::size_t m = std::max<std::size_t>(
                1, static_cast<std::size_t>(cfg.subsample * static_cast<double>(n)));
            std::vector<std::uint32_t> pool = all_rows;
            for (std::size_t k = 0; k < m; ++k) {
                const std::size_t j = k + rng.uniform_int(n - k);
                std::swap(pool[k], pool[j]);
            }
            rows.assign(pool.begin(), pool.begin() + m);
            std::sort(rows.begin(), rows.end());
        } else {
            rows = all_rows;
        }
        Tree tree = grow_tree(X, resid, w, rows, grow, rng);
        const double lr = cfg.learning_rate;
#pragma omp parallel for schedule(static) if (n >= 4096)
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
            F[i] += lr * tree.predict_row(X.row_ptr(i));
        model->trees.push_back(std::move(tree));

        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) loss += w[i] * (y[i] - F[i]) * (y[i] - F[i]);
        stage_loss.push_back(loss / wsum);
    }
    model->mutable_diag().train_loss = stage_loss.back();
    model->mutable_diag().zero_variance_target = weighted_target_variance_zero(y, w);
    return model;
}

// -------------------------------------------------------------------- mlp --

ModelPtr fit_mlp(const MlpConfig& cfg, std::uint64_t seed, const Matrix& X,
                 const std::vector<double>& y, const std::vector<double>& w) {
    if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0))
        throw std::invalid_argument("mlp: validation_fraction must be in [0,1)");
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
        throw std::invalid_argument("mlp: dropout_rate must be in [0,1)");
    if (cfg.iterations <= 0) throw std::invalid_argument("mlp: iterations must be positive");

    const std::size_t n = X.rows(), p = X.cols();
    Rng rng(derive_seed(seed, "mlp", 0));

    // train/validation row split (validation kept for model selection)
    std::vector<std::size_t> train_idx, val_idx;
    const std::size_t n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(n));
    if (n_val > 0 && n - n_val >= 2) {
        if (cfg.random_validation_split) {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0u);
            rng.shuffle(perm);
            val_idx.assign(perm.begin(), perm.begin() + n_val);
            train_idx.assign(perm.begin() + n_val, perm.end());
            std::sort(val_idx.begin(), val_idx.end());
            std::sort(train_idx.begin(), train_idx.end());
        } else {
            for (std::size_t i = 0; i < n - n_val; ++i) train_idx.push_back(i);
            for (std::size_t i = n - n_val; i < n; ++i) val_idx.push_back(i);
        }
    } else {
        train_idx.resize(n);
        std::iota(train_idx.begin(), train_idx.end(), 0u);
    }
    const std::size_t nt = train_idx.size(), nv = val_idx.size();

    // standardization from training statistics
    std::vector<double> x_mean(p, 0.0), x_sd(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double m = 0.0;
        for (std::size_t i : train_idx) m += X(i, j);
        m /= static_cast<double>(nt);
        double v = 0.0;
        for (std::size_t i : train_idx) v += (X(i, j) - m) * (X(i, j) - m);
        v /= static_cast<double>(nt);
        x_mean[j] = m;
        x_sd[j] = v > 0.0 ? std::sqrt(v) : 1.0;
    }
    double ym = 0.0, yv = 0.0;
    for (std::size_t i : train_idx) ym += y[i];
    ym /= static_cast<double>(nt);
    for (std::size_t i : train_idx) yv += (y[i] - ym) * (y[i] - ym);
    yv /= static_cast<double>(nt);
    const bool zero_var = yv <= 0.0;
    // softplus output cannot represent centered targets; scale only
    const double y_mean = cfg.softplus_output ? 0.0 : ym;
    const double y_sd = zero_var ? 1.0 : std::sqrt(yv);

    auto standardized = [&](const std::vector<std::size_t>& idx) {
        Matrix M(idx.size(), p);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < p; ++j) M(r, j) = (X(idx[r], j) - x_mean[j]) / x_sd[j];
        return M;
    };
    Matrix Xt = standardized(train_idx), Xv = standardized(val_idx);
    std::vector<double> yt(nt), yval(nv), wt(nt), wv(nv);
    for (std::size_t r = 0; r < nt; ++r) {
        yt[r] = (y[train_idx[r]] - y_mean) / y_sd;
        wt[r] = w[train_idx[r]];
    }
    for (std::size_t r = 0; r < nv; ++r) {
        yval[r] = (y[val_idx[r]] - y_mean) / y_sd;
        wv[r] = w[val_idx[r]];
    }

    auto model = std::make_shared<MlpModel>();
    model->topo = MlpTopology::make(static_cast<int>(p), cfg.hidden, cfg.softplus_output);
    model->x_mean = x_mean;
    model->x_sd = x_sd;
    model->y_mean = y_mean;
    model->y_sd = y_sd;
    mlp_init_params(model->topo, model->params, rng);

    if (zero_var) {
        // a constant target is exactly representable: zero the output layer
        const std::size_t last = model->topo.layers() - 1;
        const std::size_t in_w = static_cast<std::size_t>(model->topo.widths[last]);
        double* wout = model->params.data() + model->topo.weight_offset(last);
        for (std::size_t k = 0; k < in_w; ++k) wout[k] = 0.0;
        double bias = 0.0;
        if (cfg.softplus_output) {
            const double target = ym / y_sd; // positive by the softplus regime
            bias = target > 30.0 ? target : std::log(std::expm1(std::max(target, 1e-12)));
        }
        model->params[model->topo.bias_offset(last)] = bias;
        model->mutable_diag().zero_variance_target = true;
        model->mutable_diag().train_loss = 0.0;
        return model;
    }

    MlpWorkspace ws, ws_val;
    std::vector<double> grad;
    AdamState adam;
    std::vector<double> best_params = model->params;
    double best_val = std::numeric_limits<double>::infinity();
    double train_at_best = std::numeric_limits<double>::quiet_NaN();

    auto val_loss_of = [&](const std::vector<double>& params) {
        return mlp_loss_grad(model->topo, params, Xv.data(), nv, yval.data(), wv.data(), 0.0,
                             nullptr, ws_val, nullptr);
    };
    if (nv > 0) best_val = val_loss_of(model->params);

    const bool drop = cfg.dropout_rate > 0.0;
    double last_train = std::numeric_limits<double>::quiet_NaN();
    if (cfg.batch_size <= 0 || static_cast<std::size_t>(cfg.batch_size) >= nt) {
        // full batch: every Adam step sees all training rows and is a
        // model-selection candidate
        for (int it = 1; it <= cfg.iterations; ++it) {
            DropoutMasks masks;
            if (drop) masks = make_dropout_masks(model->topo, nt, cfg.dropout_rate, rng);
            const double loss =
                mlp_loss_grad(model->topo, model->params, Xt.data(), nt, yt.data(), wt.data(),
                              cfg.weight_decay, drop ? &masks : nullptr, ws, &grad);
            if (!std::isfinite(loss))
                throw std::runtime_error("mlp: non-finite loss at iteration " + std::to_string(it));
            adam_step(model->params, grad, adam, cfg.adam);
            last_train = loss;
            if (nv > 0) {
                const double vl = val_loss_of(model->params);
                if (vl < best_val) {
                    best_val = vl;
                    best_params = model->params;
                }
            }
        }
    } else {
        // minibatch: iterations count Adam steps over a seeded reshuffle each
        // epoch; validation snapshots at epoch boundaries and at the end
        const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
        std::vector<std::size_t> perm(nt);
        std::iota(perm.begin(), perm.end(), 0u);
        Matrix Xb(bs, p);
        std::vector<double> yb(bs), wb(bs);
        int it = 0;
        auto snapshot = [&] {
            if (nv == 0) return;
            const double vl = val_loss_of(model->params);
            if (vl < best_val) {
                best_val = vl;
                best_params = model->params;
            }
        };
        while (it < cfg.iterations) {
            rng.shuffle(perm);
            for (std::size_t start = 0; start + bs <= nt && it < cfg.iterations; start += bs) {
                ++it;
                for (std::size_t r = 0; r < bs; ++r) {
                    const std::size_t src = perm[start + r];
                    for (std::size_t j = 0; j < p; ++j) Xb(r, j) = Xt(src, j);
                    yb[r] = yt[src];
                    wb[r] = wt[src];
                }
                DropoutMasks masks;
                if (drop) masks = make_dropout_masks(model->topo, bs, cfg.dropout_rate, rng);
                const double loss =
                    mlp_loss_grad(model->topo, model->params, Xb.data(), bs, yb.data(), wb.data(),
                                  cfg.weight_decay, drop ? &masks : nullptr, ws, &grad);
                if (!std::isfinite(loss))
                    throw std::runtime_error("mlp: non-finite loss at iteration " +
                                             std::to_string(it));
                adam_step(model->params, grad, adam, cfg.adam);
                last_train = loss;
            }
            snapshot();
        }
        if (nv > 0 && !(best_val < std::numeric_limits<double>::infinity()))
            snapshot();
    }
    if (nv > 0) {
        model->params = best_params;
        model->mutable_diag().validation_loss = best_val;
        train_at_best = mlp_loss_grad(model->topo, model->params, Xt.data(), nt, yt.data(),
                                      wt.data(), 0.0, nullptr, ws, nullptr);
        model->mutable_diag().train_loss = train_at_best;
    } else {
        model->mutable_diag().train_loss = last_train;
    }
    model->mutable_diag().zero_variance_target = zero_var;
    return model;
}

} // namespace

ModelPtr fit(const LearnerSpec& spec, const Matrix& X, const std::vector<double>& y,
             const std::vector<double>* weights) {
    validate_inputs(X, y, weights);
    std::vector<double> w;
    if (weights)
        w = *weights;
    else
        w.assign(X.rows(), 1.0);

    switch (spec.kind) {
    case LearnerKind::Linear:
        return fit_linear(X, y, w);
    case LearnerKind::Rf:
        return fit_rf(spec.rf, spec.seed, X, y, w);
    case LearnerKind::Gbt:
        return fit_gbt(spec.gbt, spec.seed, X, y, w);
    case LearnerKind::Mlp:
        return fit_mlp(spec.mlp, spec.seed, X, y, w);
    }
    throw std::logic_error("fit: bad learner kind");
}

std::vector<double> predict(const Model& model, const Matrix& X) {
    if (X.cols() != model.feature_count())
        throw std::invalid_argument("predict: feature count mismatch, model expects " +
                                    std::to_string(model.feature_count()) + ", got " +
                                    std::to_string(X.cols()));
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < X.cols(); ++j)
            if (!std::isfinite(X(i, j)))
                throw std::invalid_argument("predict: non-finite feature at row " + std::to_string(i));
    return model.predict_raw(X);
}

// ------------------------------------------------------- model prediction --

std::vector<double> LinearModel::predict_raw(const Matrix& X) const {
    std::vector<double> out(X.rows());
#pragma omp parallel for schedule(static) if (X.rows() * X.cols() >= 1u << 16)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(X.rows()); ++i) {
        double s = beta[0];
        const double* row = X.row_ptr(i);
        for (std::size_t j = 0; j + 1 < beta.size(); ++j) s += beta[j + 1] * row[j];
        out[i] = s;
    }
    return out;
}

std::vector<double> RfModel::predict_raw(const Matrix& X) const {
    std::vector<double> out(X.rows());
#pragma omp parallel for schedule(static) if (X.rows() >= 512)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(X.rows()); ++i) {
        const double* row = X.row_ptr(i);
        double s = 0.0;
        for (const auto& t : trees) s += t.predict_row(row);
        out[i] = s / static_cast<double>(trees.size());
    }
    return out;
}

std::vector<double> GbtModel::predict_raw(const Matrix& X) const {
    std::vector<double> out(X.rows());
#pragma omp parallel for schedule(static) if (X.rows() >= 512)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(X.rows()); ++i) {
        const double* row = X.row_ptr(i);
        double s = f0;
        for (const auto& t : trees) s += learning_rate * t.predict_row(row);
        out[i] = s;
    }
    return out;
}

std::vector<double> MlpModel::predict_raw(const Matrix& X) const {
    const std::size_t n = X.rows(), p = X.cols();
    Matrix Xs(n, p);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) Xs(i, j) = (X(i, j) - x_mean[j]) / x_sd[j];
    MlpWorkspace ws;
    mlp_forward(topo, params.data(), Xs.data(), n, ws, nullptr);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = ws.out[i] * y_sd + y_mean;
    return out;
}

} // namespace chm::learn
