#pragma once

#include "predpca/baselines.hpp"
#include "predpca/ica.hpp"
#include "predpca/predpca.hpp"
#include "predpca/synth.hpp"
#include "predpca/sysid.hpp"

#include <filesystem>

namespace predpca {

// Models are stored as a directory: a versioned key-value manifest
// ("manifest.txt") plus one PMAT blob per matrix field. Round trips are
// bit-exact.

void save_model(const PredModel& model, const std::filesystem::path& dir);
PredModel load_model(const std::filesystem::path& dir);

void save_estimate(const SystemEstimate& est, const std::filesystem::path& dir);
SystemEstimate load_estimate(const std::filesystem::path& dir);

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& dir);
GroundTruth load_ground_truth(const std::filesystem::path& dir);

void save_ica(const ICAModel& model, const std::filesystem::path& dir);
ICAModel load_ica(const std::filesystem::path& dir);

}  // namespace predpca
