#include "chm/gdhm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "chm/csv.hpp"
#include "chm/detail/models.hpp"
#include "chm/mlp_core.hpp"
#include "chm/rng.hpp"

namespace chm::gdhm {

using learn::MlpTopology;
using learn::MlpWorkspace;

GdhmFit fit_gdhm(const FluxFrame& frame, const GdhmConfig& cfg) {
    std::vector<std::string> cols = cfg.rb_predictors;
    if (cfg.include_ta_in_rb) cols.push_back(cfg.ta_column);

    const std::size_t n = frame.n_rows();
    const auto& reco = frame.col(cfg.reco_column);
    const auto& ta = frame.col(cfg.ta_column);
    for (std::size_t i = 0; i < n; ++i)
        if (!(reco[i] > 0.0))
            throw std::invalid_argument("fit_gdhm: non-positive target at row " + std::to_string(i));

    std::vector<const std::vector<double>*> ptrs;
    for (const auto& c : cols) ptrs.push_back(&frame.col(c));
    Matrix X = Matrix::from_columns(ptrs);
    const std::size_t p = X.cols();

    std::vector<double> f(n);
    for (std::size_t i = 0; i < n; ++i) f[i] = (ta[i] - cfg.t_ref) / 10.0;

    Rng rng(derive_seed(cfg.seed, "gdhm", 0));

    // train / validation split (validation kept for model selection)
    std::vector<std::size_t> train_idx, val_idx;
    const std::size_t n_val =
        static_cast<std::size_t>(cfg.mlp.validation_fraction * static_cast<double>(n));
    if (n_val > 0 && n - n_val >= 2) {
        if (cfg.mlp.random_validation_split) {
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
    auto standardized = [&](const std::vector<std::size_t>& idx) {
        Matrix M(idx.size(), p);
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t j = 0; j < p; ++j) M(r, j) = (X(idx[r], j) - x_mean[j]) / x_sd[j];
        return M;
    };
    Matrix Xt = standardized(train_idx), Xv = standardized(val_idx);
    std::vector<double> yt(nt), ft(nt), yv(nv), fv(nv);
    for (std::size_t r = 0; r < nt; ++r) {
        yt[r] = reco[train_idx[r]];
        ft[r] = f[train_idx[r]];
    }
    for (std::size_t r = 0; r < nv; ++r) {
        yv[r] = reco[val_idx[r]];
        fv[r] = f[val_idx[r]];
    }

    const MlpTopology topo = MlpTopology::make(static_cast<int>(p), cfg.mlp.hidden, true);
    const std::size_t np = topo.param_count();
    // joint parameter vector: NN weights followed by theta = log Q10
    std::vector<double> params;
    learn::mlp_init_params(topo, params, rng);
    params.push_back(std::log(std::max(rng.normal(cfg.q10_init_mean, cfg.q10_init_sd), 0.05)));

    MlpWorkspace ws, wsv;
    std::vector<double> grad(np + 1, 0.0), nn_grad;
    std::vector<double> out_delta(nt);
    learn::AdamState adam;

    auto eval_loss = [&](const std::vector<double>& prm, const Matrix& Xm,
                         const std::vector<double>& y, const std::vector<double>& fvec,
                         MlpWorkspace& w) {
        learn::mlp_forward(topo, prm.data(), Xm.data(), y.size(), w, nullptr);
        double loss = 0.0;
        const double theta = prm[np];
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = w.out[i] * std::exp(theta * fvec[i]) - y[i];
            loss += r * r;
        }
        return loss / static_cast<double>(y.size());
    };

    GdhmFit fit;
    fit.rb_columns = cols;
    fit.t_ref = cfg.t_ref;
    fit.ta_column = cfg.ta_column;

    std::vector<double> best_params = params;
    double best_val = nv > 0 ? eval_loss(params, Xv, yv, fv, wsv)
                             : std::numeric_limits<double>::infinity();
    double last_train = eval_loss(params, Xt, yt, ft, ws);

    const bool drop = cfg.mlp.dropout_rate > 0.0;
    for (int it = 1; it <= cfg.mlp.iterations; ++it) {
        learn::DropoutMasks masks;
        if (drop) masks = learn::make_dropout_masks(topo, nt, cfg.mlp.dropout_rate, rng);
        learn::mlp_forward(topo, params.data(), Xt.data(), nt, ws, drop ? &masks : nullptr);

        const double theta = params[np];
        double loss = 0.0, dtheta = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            const double e = std::exp(theta * ft[i]);
            const double pred = ws.out[i] * e;
            const double r = pred - yt[i];
            loss += r * r;
            out_delta[i] = 2.0 * r * e / static_cast<double>(nt);
            dtheta += 2.0 * r * pred * ft[i] / static_cast<double>(nt);
        }
        loss /= static_cast<double>(nt);
        if (cfg.mlp.weight_decay > 0.0)
            for (std::size_t k = 0; k < np; ++k) loss += cfg.mlp.weight_decay * params[k] * params[k];
        if (!std::isfinite(loss))
            throw std::runtime_error("fit_gdhm: non-finite loss at iteration " + std::to_string(it));

        nn_grad.assign(np, 0.0);
        learn::mlp_backward(topo, params.data(), Xt.data(), nt, ws, out_delta.data(),
                            drop ? &masks : nullptr, nn_grad.data());
        for (std::size_t k = 0; k < np; ++k) {
            grad[k] = nn_grad[k];
            // weight decay regularizes the network weights, not the physical parameter
            if (cfg.mlp.weight_decay > 0.0) grad[k] += 2.0 * cfg.mlp.weight_decay * params[k];
        }
        grad[np] = dtheta;
        learn::adam_step(params, grad, adam, cfg.mlp.adam);
        last_train = loss;

        double vl = std::numeric_limits<double>::quiet_NaN();
        if (nv > 0) {
            vl = eval_loss(params, Xv, yv, fv, wsv);
            if (vl < best_val) {
                best_val = vl;
                best_params = params;
            }
        }
        if (cfg.record_history) {
            fit.train_loss_history.push_back(loss);
            fit.val_loss_history.push_back(vl);
        }
    }

    if (nv > 0) {
        params = best_params;
        fit.diag.validation_loss = best_val;
        fit.diag.train_loss = eval_loss(params, Xt, yt, ft, ws);
    } else {
        fit.diag.train_loss = last_train;
    }

    fit.q10_hat = std::exp(params[np]);
    auto rb = std::make_shared<learn::MlpModel>();
    rb->topo = topo;
    rb->params.assign(params.begin(), params.begin() + np);
    rb->x_mean = x_mean;
    rb->x_sd = x_sd;
    rb->y_mean = 0.0;
    rb->y_sd = 1.0;
    rb->mutable_diag() = fit.diag;
    fit.rb_model = rb;
    return fit;
}

std::vector<double> predict_gdhm(double q10_hat, const learn::Model& rb_model,
                                 const std::vector<std::string>& rb_columns,
                                 const std::string& ta_column, double t_ref,
                                 const FluxFrame& frame) {
    std::vector<const std::vector<double>*> ptrs;
    for (const auto& c : rb_columns) ptrs.push_back(&frame.col(c));
    Matrix X = Matrix::from_columns(ptrs);
    auto rb = learn::predict(rb_model, X);
    const auto& ta = frame.col(ta_column);
    for (std::size_t i = 0; i < rb.size(); ++i)
        rb[i] *= std::pow(q10_hat, (ta[i] - t_ref) / 10.0);
    return rb;
}

std::vector<double> predict_gdhm(const GdhmFit& fit, const FluxFrame& frame) {
    return predict_gdhm(fit.q10_hat, *fit.rb_model, fit.rb_columns, fit.ta_column, fit.t_ref,
                        frame);
}

void write_history_csv(const GdhmFit& fit, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_history_csv: cannot open '" + path + "'");
    out << "iteration,train_loss,val_loss\n";
    for (std::size_t i = 0; i < fit.train_loss_history.size(); ++i) {
        out << (i + 1) << ',' << format_double(fit.train_loss_history[i]) << ',';
        const double v = i < fit.val_loss_history.size() ? fit.val_loss_history[i]
                                                         : std::numeric_limits<double>::quiet_NaN();
        if (std::isnan(v))
            out << "";
        else
            out << format_double(v);
        out << '\n';
    }
}

} // namespace chm::gdhm
