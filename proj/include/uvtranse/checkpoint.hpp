// SPDX-License-Identifier: Apache-2.0
//
// Versioned checkpoint document:
//   {"config": {...}, "format": "uvtranse-ckpt", "version": 1,
//    "params": {name: {"shape": [...], "data": [...]}},
//    "class_words": {"shape": [...], "data": [...]}}   (language models only)
// written as canonical JSON so save -> load -> save is byte-identical.
#pragma once

#include <string>

#include "uvtranse/canonical_json.hpp"
#include "uvtranse/relation_model.hpp"

namespace uvt {

inline constexpr const char* kCheckpointFormat = "uvtranse-ckpt";
inline constexpr int kCheckpointVersion = 1;

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

Json checkpoint_to_json(RelationModel& model);
RelationModel checkpoint_from_json(const Json& doc);

void save_checkpoint(RelationModel& model, const std::string& path);
RelationModel load_checkpoint(const std::string& path);

}  // namespace uvt
