#pragma once

#include <array>
#include <string>
#include <vector>

#include "kgfuse/dataset.hpp"
#include "kgfuse/tensor.hpp"

namespace kgfuse {

enum class NodeKind {
    GlobalTextClaim,
    GlobalTextEvidence,
    TextEntity,
    KeyPhrase,
    GlobalImageClaim,
    GlobalImageEvidence,
    VisualObject,
};

std::string to_string(NodeKind kind);
bool is_global(NodeKind kind);
bool is_textual(NodeKind kind);

/// Fully connected heterogeneous graph for one record: typed nodes in
/// canonical order [t_c, t_e, T..., K..., o_c, o_e, O...] and a symmetric
/// cosine-similarity edge-weight matrix with unit diagonal.
struct HeteroGraph {
    struct Node {
        NodeKind kind;
        std::vector<double> embedding;
    };

    std::vector<Node> nodes;
    Tensor edge_weights;             // [V x V]
    std::array<int, 4> global_index; // positions of t_c, t_e, o_c, o_e

    int size() const { return static_cast<int>(nodes.size()); }
};

/// Builds the graph from a record that already passed filter_and_dedup.
/// Cross-modal pairs with differing dimensions use cosine over the shared
/// prefix of coordinates.
HeteroGraph build_graph(const KnowledgeRecord& record);

/// Maps a cosine weight in [-1, 1] to a positive attention factor in (0, 1]:
/// max((1 + w) / 2, 1e-6).
double edge_transform(double w);

/// Matrix of transformed edge weights; the diagonal is exactly 1.
Tensor edge_factors(const HeteroGraph& graph);

/// Subgraph containing only the four global nodes (w/o Multi-Knowledge).
HeteroGraph globals_only(const HeteroGraph& graph);

/// Debug dump {nodes: [{kind, dim}], edge_weights: [[...]]} for golden-file
/// tests.
std::string graph_to_json(const HeteroGraph& graph);

} // namespace kgfuse
