// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "modigen/ast.hpp"
#include "modigen/corpus.hpp"

namespace modigen {

enum class NodeKind { Component, Connector, Equation, Parameter, Interface };
enum class EdgeKind { Extension, Connection, Invocation, Instantiation };

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);

using NodeId = std::int64_t;

struct GraphNode {
    NodeId id = 0;
    NodeKind kind = NodeKind::Component;
    std::string label;
    // Common keys: description, documentation, type_name, library, owner, source, stub.
    std::map<std::string, std::string> attributes;

    bool is_stub() const;
    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    NodeId src = 0;
    NodeId dst = 0;
    EdgeKind kind = EdgeKind::Instantiation;

    bool operator==(const GraphEdge&) const = default;
};

/// Node ids equal their position in `nodes`.
struct PropertyGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::map<std::string, NodeId> component_index;  // label of every Component node

    const GraphNode& node(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
    std::size_t count_edges(EdgeKind kind) const;
    std::size_t count_nodes(NodeKind kind) const;
    const GraphNode* find_label(std::string_view label) const;

    bool operator==(const PropertyGraph&) const = default;
};

/// Builds the graph. Corpus records are matched to components by qualified name and
/// fill in description/documentation the component itself lacks. Containment is
/// recorded as an "owner" attribute rather than an edge. Unresolved type and endpoint
/// references become nodes with attribute stub=true.
PropertyGraph build_graph(const std::vector<Component>& components, const std::vector<CorpusRecord>& corpus = {});

/// Parses each record's model with its source as prefix and returns the top-level classes.
std::vector<Component> components_from_corpus(const std::vector<CorpusRecord>& corpus);

struct Snippet {
    double score = 0.0;
    std::string source_label;
    std::string text;
};

struct RetrievalResult {
    std::vector<Snippet> snippets;  // by score, descending
    std::size_t total_chars = 0;
};

struct RetrievalOptions {
    std::size_t hops = 1;
    std::size_t char_budget = 4000;
    std::size_t seeds = 5;
};

/// Lowercase terms, split on non-alphanumerics and camelCase boundaries.
std::vector<std::string> query_terms(std::string_view text);

/// Lexical score of one node: 2 per query-term occurrence in the label plus 1 per
/// occurrence in scored attributes (owner, source and stub are not scored).
double score_node(const GraphNode& node, const std::vector<std::string>& terms);

RetrievalResult retrieve(const PropertyGraph& graph, std::string_view query, const RetrievalOptions& options = {});

std::string graph_to_json(const PropertyGraph& graph);
/// Throws FormatError on malformed input, a format_version other than 1, or bad edges.
PropertyGraph graph_from_json(std::string_view text);
void save_graph(const PropertyGraph& graph, const std::filesystem::path& path);
PropertyGraph load_graph(const std::filesystem::path& path);

}  // namespace modigen
