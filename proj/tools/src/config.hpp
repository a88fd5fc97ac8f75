#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "fairmf/antidote.hpp"
#include "fairmf/baselines.hpp"
#include "fairmf/data.hpp"
#include "fairmf/factorization.hpp"
#include "fairmf/harness.hpp"

namespace fairmf::cli {

using Json = nlohmann::json;

// Throws IoError when unreadable and ParseError on malformed JSON.
Json load_config(const std::filesystem::path& path);

// Each overlays the keys present in `j` onto `out`. Unknown keys and type
// mismatches are ValidationErrors.
void apply(const Json& j, TrainConfig& out);
void apply(const Json& j, AntidoteConfig& out);
void apply(const Json& j, SyntheticConfig& out);
void apply(const Json& j, RegularizationConfig& out);

// Sections: "synthetic" or "files", "train", "antidote", "regularization",
// "experiment". A missing source defaults to the synthetic block model.
ExperimentSpec spec_from_json(const Json& doc);

// Accepts "binary" or "LO-HI", e.g. "1-5".
RatingScale parse_scale(const std::string& text);

Json to_json(const TrainConfig& cfg);
Json to_json(const AntidoteConfig& cfg);

}  // namespace fairmf::cli
