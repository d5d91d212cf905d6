#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "chm/detail/models.hpp"

namespace chm::learn {

namespace {

using nlohmann::json;

json diag_to_json(const Diagnostics& d) {
    json j;
    j["train_loss"] = d.train_loss;
    j["validation_loss"] = d.validation_loss;
    j["zero_variance_target"] = d.zero_variance_target;
    if (!d.stage_train_loss.empty()) j["stage_train_loss"] = d.stage_train_loss;
    return j;
}

Diagnostics diag_from_json(const json& j) {
    Diagnostics d;
    auto num = [](const json& v) {
        return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    d.train_loss = num(j.at("train_loss"));
    d.validation_loss = num(j.at("validation_loss"));
    d.zero_variance_target = j.at("zero_variance_target").get<bool>();
    if (j.contains("stage_train_loss"))
        d.stage_train_loss = j.at("stage_train_loss").get<std::vector<double>>();
    return d;
}

json trees_to_json(const std::vector<Tree>& trees) {
    json list = json::array();
    for (const auto& t : trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        list.push_back(std::move(nodes));
    }
    return list;
}

std::vector<Tree> trees_from_json(const json& list) {
    std::vector<Tree> trees;
    for (const auto& tj : list) {
        Tree t;
        for (const auto& nj : tj) {
            TreeNode n;
            n.feature = nj.at(0).get<std::int32_t>();
            n.threshold = nj.at(1).get<double>();
            n.left = nj.at(2).get<std::int32_t>();
            n.right = nj.at(3).get<std::int32_t>();
            n.value = nj.at(4).get<double>();
            t.nodes.push_back(n);
        }
        trees.push_back(std::move(t));
    }
    return trees;
}

} // namespace

void save_model(const Model& model, std::ostream& out) {
    json j;
    j["format"] = "chm-model";
    j["version"] = 1;
    j["kind"] = model.kind_name();
    j["diagnostics"] = diag_to_json(model.diagnostics());
    if (auto* m = dynamic_cast<const LinearModel*>(&model)) {
        j["beta"] = m->beta;
    } else if (auto* m = dynamic_cast<const RfModel*>(&model)) {
        j["n_features"] = m->n_features;
        j["trees"] = trees_to_json(m->trees);
    } else if (auto* m = dynamic_cast<const GbtModel*>(&model)) {
        j["n_features"] = m->n_features;
        j["f0"] = m->f0;
        j["learning_rate"] = m->learning_rate;
        j["trees"] = trees_to_json(m->trees);
    } else if (auto* m = dynamic_cast<const MlpModel*>(&model)) {
        j["widths"] = m->topo.widths;
        j["softplus_output"] = m->topo.softplus_output;
        j["params"] = m->params;
        j["x_mean"] = m->x_mean;
        j["x_sd"] = m->x_sd;
        j["y_mean"] = m->y_mean;
        j["y_sd"] = m->y_sd;
    } else {
        throw std::logic_error("save_model: unknown model type");
    }
    out << j.dump();
}

ModelPtr load_model(std::istream& in) {
    json j = json::parse(in);
    if (j.at("format").get<std::string>() != "chm-model")
        throw std::runtime_error("load_model: not a chm-model file");
    if (j.at("version").get<int>() != 1)
        throw std::runtime_error("load_model: unsupported version");
    const std::string kind = j.at("kind").get<std::string>();
    const Diagnostics diag = diag_from_json(j.at("diagnostics"));
    if (kind == "linear") {
        auto m = std::make_shared<LinearModel>();
        m->beta = j.at("beta").get<std::vector<double>>();
        m->mutable_diag() = diag;
        return m;
    }
    if (kind == "rf") {
        auto m = std::make_shared<RfModel>();
        m->n_features = j.at("n_features").get<std::size_t>();
        m->trees = trees_from_json(j.at("trees"));
        m->mutable_diag() = diag;
        return m;
    }
    if (kind == "gbt") {
        auto m = std::make_shared<GbtModel>();
        m->n_features = j.at("n_features").get<std::size_t>();
        m->f0 = j.at("f0").get<double>();
        m->learning_rate = j.at("learning_rate").get<double>();
        m->trees = trees_from_json(j.at("trees"));
        m->mutable_diag() = diag;
        return m;
    }
    if (kind == "mlp") {
        auto m = std::make_shared<MlpModel>();
        m->topo.widths = j.at("widths").get<std::vector<int>>();
        m->topo.softplus_output = j.at("softplus_output").get<bool>();
        m->params = j.at("params").get<std::vector<double>>();
        m->x_mean = j.at("x_mean").get<std::vector<double>>();
        m->x_sd = j.at("x_sd").get<std::vector<double>>();
        m->y_mean = j.at("y_mean").get<double>();
        m->y_sd = j.at("y_sd").get<double>();
        m->mutable_diag() = diag;
        return m;
    }
    throw std::runtime_error("load_model: unknown kind '" + kind + "'");
}

} // namespace chm::learn
