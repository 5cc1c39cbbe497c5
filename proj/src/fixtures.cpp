#include "amr/fixtures.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace amr {

using nlohmann::json;

LossFixture parse_loss_fixture(const std::string &json_text, std::string name) {
    LossFixture fx;
    fx.name = std::move(name);
    try {
        const json j = json::parse(json_text);
        if (auto it = j.find("weights"); it != j.end()) {
            fx.weights.lambda_l1 = it->value("lambda_l1", fx.weights.lambda_l1);
            fx.weights.lambda_giou = it->value("lambda_giou", fx.weights.lambda_giou);
            fx.weights.lambda_score = it->value("lambda_score", fx.weights.lambda_score);
        }
        for (const auto &p : j.at("preds")) {
            fx.preds.push_back({{p.at("center").get<double>(), p.at("width").get<double>()},
                                p.at("confidence").get<double>()});
        }
        for (const auto &g : j.at("gts")) {
            fx.gts.push_back({g.at("center").get<double>(), g.at("width").get<double>()});
        }
        if (auto it = j.find("expected"); it != j.end()) {
            if (it->contains("loss")) {
                fx.expected_loss = it->at("loss").get<double>();
            }
            if (it->contains("assignment")) {
                Assignment a;
                for (const auto &pair : it->at("assignment")) {
                    a.pairs.emplace_back(pair.at(0).get<std::size_t>(),
                                         pair.at(1).get<std::size_t>());
                }
                fx.expected_assignment = std::move(a);
            }
        }
    } catch (const json::exception &e) {
        throw IoError("loss fixture " + fx.name + ": " + e.what());
    }
    validate(fx.weights);
    return fx;
}

LossFixture read_loss_fixture(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_loss_fixture(text.str(), path.filename().string());
}

} // namespace amr
