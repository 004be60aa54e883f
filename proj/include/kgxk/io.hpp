#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgxk/explainer.hpp"
#include "kgxk/model.hpp"
#include "kgxk/protocol.hpp"

namespace kgxk {

using Json = nlohmann::json;

// Model checkpoints are JSON documents tagged with a format name and version;
// loading validates every tensor shape against the embedded config.
Json model_to_json(const ModelHandle& model);
ModelHandle model_from_json(const Json& j);
void save_model(const std::filesystem::path& path, const ModelHandle& model);
ModelHandle load_model(const std::filesystem::path& path);

Json masknet_to_json(const MaskNet& net);
MaskNet masknet_from_json(const Json& j);
void save_masknet(const std::filesystem::path& path, const MaskNet& net);
MaskNet load_masknet(const std::filesystem::path& path);

// One JSON object per line with fields query, budget, edges, converged.
// Names are surface names; inverse relations carry a "^-1" suffix.
Json explanation_to_json(const Explanation& e, const KnowledgeGraph& g);
Explanation explanation_from_json(const Json& j, const KnowledgeGraph& g);
void write_explanations(const std::filesystem::path& path, std::span<const Explanation> explanations,
                        const KnowledgeGraph& g);
std::vector<Explanation> read_explanations(const std::filesystem::path& path, const KnowledgeGraph& g);

Json report_to_json(const ProtocolReport& report);
ProtocolReport report_from_json(const Json& j);

Json metrics_to_json(const RankingMetrics& m);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace kgxk
