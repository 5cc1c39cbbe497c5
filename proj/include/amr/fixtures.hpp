#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "amr/losses.hpp"

namespace amr {

// Golden loss case:
// {"weights": {"lambda_l1", "lambda_giou", "lambda_score"},
//  "preds": [{"center", "width", "confidence"}], "gts": [{"center", "width"}],
//  "expected": {"loss": x, "assignment": [[k, n], ...]}}
struct LossFixture {
    std::string name;
    LossWeights weights;
    std::vector<Candidate> preds;
    std::vector<NormalizedMoment> gts;
    std::optional<double> expected_loss;
    std::optional<Assignment> expected_assignment;
};

LossFixture parse_loss_fixture(const std::string &json_text, std::string name = {});
LossFixture read_loss_fixture(const std::filesystem::path &path);

} // namespace amr
