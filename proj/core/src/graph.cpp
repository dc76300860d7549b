#include "kgfuse/graph.hpp"

#include <algorithm>

#include <json.hpp>

namespace kgfuse {

std::string to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::GlobalTextClaim: return "global_text_claim";
        case NodeKind::GlobalTextEvidence: return "global_text_evidence";
        case NodeKind::TextEntity: return "text_entity";
        case NodeKind::KeyPhrase: return "key_phrase";
        case NodeKind::GlobalImageClaim: return "global_image_claim";
        case NodeKind::GlobalImageEvidence: return "global_image_evidence";
        case NodeKind::VisualObject: return "visual_object";
    }
    throw ValidationError("unreachable node kind");
}

bool is_global(NodeKind kind) {
    return kind == NodeKind::GlobalTextClaim || kind == NodeKind::GlobalTextEvidence ||
           kind == NodeKind::GlobalImageClaim || kind == NodeKind::GlobalImageEvidence;
}

bool is_textual(NodeKind kind) {
    return kind == NodeKind::GlobalTextClaim || kind == NodeKind::GlobalTextEvidence ||
           kind == NodeKind::TextEntity || kind == NodeKind::KeyPhrase;
}

double edge_transform(double w) {
    if (w < -1.0 || w > 1.0) {
        throw ValidationError("edge_transform input " + std::to_string(w) + " outside [-1, 1]");
    }
    return std::max((1.0 + w) / 2.0, 1e-6);
}

namespace {

double pair_weight(const HeteroGraph::Node& a, const HeteroGraph::Node& b) {
    const std::size_t d = std::min(a.embedding.size(), b.embedding.size());
    return cosine_similarity(std::span(a.embedding).first(d), std::span(b.embedding).first(d));
}

} // namespace

HeteroGraph build_graph(const KnowledgeRecord& record) {
    HeteroGraph g;
    g.nodes.push_back({NodeKind::GlobalTextClaim, record.claim_text_emb});
    g.nodes.push_back({NodeKind::GlobalTextEvidence, record.evidence_text_emb});
    for (const auto& item : record.text_entities) {
        g.nodes.push_back({NodeKind::TextEntity, item.embedding});
    }
    for (const auto& item : record.key_phrases) {
        g.nodes.push_back({NodeKind::KeyPhrase, item.embedding});
    }
    const int image_claim_pos = g.size();
    g.nodes.push_back({NodeKind::GlobalImageClaim, record.claim_image_emb});
    g.nodes.push_back({NodeKind::GlobalImageEvidence, record.evidence_image_emb});
    for (const auto& item : record.visual_objects) {
        g.nodes.push_back({NodeKind::VisualObject, item.embedding});
    }
    g.global_index = {0, 1, image_claim_pos, image_claim_pos + 1};

    const int v = g.size();
    g.edge_weights = Tensor({v, v});
    for (int i = 0; i < v; ++i) {
        g.edge_weights.at(i, i) = 1.0;
        for (int j = i + 1; j < v; ++j) {
            const double w = pair_weight(g.nodes[static_cast<std::size_t>(i)],
                                         g.nodes[static_cast<std::size_t>(j)]);
            g.edge_weights.at(i, j) = w;
            g.edge_weights.at(j, i) = w;
        }
    }
    return g;
}

Tensor edge_factors(const HeteroGraph& graph) {
    const int v = graph.size();
    Tensor f({v, v});
    for (int i = 0; i < v; ++i) {
        for (int j = 0; j < v; ++j) {
            f.at(i, j) = i == j ? 1.0 : edge_transform(graph.edge_weights.at(i, j));
        }
    }
    return f;
}

HeteroGraph globals_only(const HeteroGraph& graph) {
    HeteroGraph g;
    for (int idx : graph.global_index) {
        g.nodes.push_back(graph.nodes[static_cast<std::size_t>(idx)]);
    }
    g.global_index = {0, 1, 2, 3};
    g.edge_weights = Tensor({4, 4});
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            g.edge_weights.at(i, j) = graph.edge_weights.at(
                graph.global_index[static_cast<std::size_t>(i)],
                graph.global_index[static_cast<std::size_t>(j)]);
        }
    }
    return g;
}

std::string graph_to_json(const HeteroGraph& graph) {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& node : graph.nodes) {
        j["nodes"].push_back({{"kind", to_string(node.kind)},
                              {"dim", node.embedding.size()}});
    }
    j["edge_weights"] = nlohmann::ordered_json::array();
    for (int i = 0; i < graph.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int jj = 0; jj < graph.size(); ++jj) row.push_back(graph.edge_weights.at(i, jj));
        j["edge_weights"].push_back(std::move(row));
    }
    return j.dump();
}

} // namespace kgfuse
