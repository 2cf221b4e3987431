// SPDX-License-Identifier: Apache-2.0
#include "modigen/graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <set>
#include <tuple>
#include <unordered_map>

#include "json.hpp"

#include "modigen/error.hpp"
#include "modigen/io.hpp"
#include "modigen/lexer.hpp"
#include "modigen/parser.hpp"

namespace modigen {
using ojson = nlohmann::ordered_json;

std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Component: return "Component";
        case NodeKind::Connector: return "Connector";
        case NodeKind::Equation: return "Equation";
        case NodeKind::Parameter: return "Parameter";
        case NodeKind::Interface: return "Interface";
    }
    return "?";
}

std::string_view to_string(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::Extension: return "Extension";
        case EdgeKind::Connection: return "Connection";
        case EdgeKind::Invocation: return "Invocation";
        case EdgeKind::Instantiation: return "Instantiation";
    }
    return "?";
}

bool GraphNode::is_stub() const {
    auto it = attributes.find("stub");
    return it != attributes.end() && it->second == "true";
}

std::size_t PropertyGraph::count_edges(EdgeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [&](const GraphEdge& e) { return e.kind == kind; }));
}

std::size_t PropertyGraph::count_nodes(NodeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [&](const GraphNode& n) { return n.kind == kind; }));
}

const GraphNode* PropertyGraph::find_label(std::string_view label) const {
    for (const auto& n : nodes)
        if (n.label == label) return &n;
    return nullptr;
}

namespace {

bool is_builtin_type(std::string_view t) {
    return t == "Real" || t == "Integer" || t == "Boolean" || t == "String";
}

std::string first_segment(std::string_view ref) {
    const auto cut = ref.find_first_of(".[");
    return std::string(ref.substr(0, cut));
}

std::string strip_subscripts_and_space(std::string_view ref) {
    std::string out;
    int depth = 0;
    for (char c : ref) {
        if (c == '[') ++depth;
        if (depth == 0 && !std::isspace(static_cast<unsigned char>(c))) out += c;
        if (c == ']') --depth;
    }
    return out;
}

// Dotted identifier chains in equation text, excluding function names.
std::vector<std::string> referenced_paths(std::string_view text) {
    std::vector<Token> toks;
    try {
        for (auto& t : tokenize(text).tokens)
            if (t.kind != TokenKind::Comment) toks.push_back(std::move(t));
    } catch (const Error&) {
        return {};
    }
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < toks.size()) {
        if (toks[i].kind != TokenKind::Identifier || (i > 0 && toks[i - 1].is(TokenKind::Punctuation, "."))) {
            ++i;
            continue;
        }
        std::string path = toks[i].text;
        std::size_t j = i + 1;
        while (j + 1 < toks.size() && toks[j].is(TokenKind::Punctuation, ".") &&
               toks[j + 1].kind == TokenKind::Identifier) {
            path += "." + toks[j + 1].text;
            j += 2;
        }
        const bool is_call = j < toks.size() && toks[j].is(TokenKind::Punctuation, "(");
        if (!is_call && std::find(out.begin(), out.end(), path) == out.end()) out.push_back(path);
        i = j;
    }
    return out;
}

class GraphBuilder {
public:
    GraphBuilder(const std::vector<Component>& comps, const std::vector<CorpusRecord>& corpus) : comps_(comps) {
        for (const auto& r : corpus) records_.emplace(r.qualified_name(), &r);
    }

    PropertyGraph build() {
        for (const auto& c : comps_) add_component_node(c);
        for (const auto& c : comps_) {
            if (built_.insert(c.qualified_name).second) add_members(c);
        }
        return std::move(g_);
    }

private:
    NodeId add_node(NodeKind kind, std::string label, std::map<std::string, std::string> attrs) {
        GraphNode n;
        n.id = static_cast<NodeId>(g_.nodes.size());
        n.kind = kind;
        n.label = std::move(label);
        n.attributes = std::move(attrs);
        if (kind == NodeKind::Component) g_.component_index.emplace(n.label, n.id);
        by_label_.emplace(n.label, n.id);
        g_.nodes.push_back(std::move(n));
        return g_.nodes.back().id;
    }

    void add_edge(NodeId src, NodeId dst, EdgeKind kind) {
        if (kind == EdgeKind::Extension && src == dst) return;
        GraphEdge e{src, dst, kind};
        if (edge_set_.insert({src, dst, static_cast<int>(kind)}).second) g_.edges.push_back(e);
    }

    void add_component_node(const Component& c) {
        if (g_.component_index.count(c.qualified_name)) return;
        std::map<std::string, std::string> attrs;
        std::string description = c.description;
        std::string documentation = c.documentation;
        std::string source = c.cleaned_source;
        if (auto it = records_.find(c.qualified_name); it != records_.end()) {
            if (description.empty()) description = it->second->description;
            if (documentation.empty()) documentation = it->second->documentation;
            if (source.empty()) source = it->second->model;
        }
        attrs["restriction"] = std::string(to_string(c.kind));
        attrs["name"] = c.name;
        attrs["library"] = first_segment(c.qualified_name);
        if (!description.empty()) attrs["description"] = description;
        if (!documentation.empty()) attrs["documentation"] = documentation;
        if (!source.empty()) attrs["source"] = source;
        if (!c.enclosing.empty()) attrs["owner"] = c.enclosing;
        const NodeId id = add_node(NodeKind::Component, c.qualified_name, std::move(attrs));
        comp_by_id_.emplace(id, &c);
    }

    // Modelica-style lookup: enclosing scopes first, then the full path, then a suffix match.
    NodeId resolve_type(const Component& from, const std::string& type_path) {
        std::string path = type_path;
        if (!path.empty() && path.front() == '.') path.erase(0, 1);
        std::string scope = from.qualified_name;
        while (!scope.empty()) {
            if (auto it = g_.component_index.find(scope + "." + path); it != g_.component_index.end() &&
                                                                       !g_.node(it->second).is_stub())
                return it->second;
            const auto dot = scope.rfind('.');
            scope = dot == std::string::npos ? std::string{} : scope.substr(0, dot);
        }
        if (auto it = g_.component_index.find(path); it != g_.component_index.end()) return it->second;
        NodeId best = -1;
        const std::string suffix = "." + path;
        for (const auto& [label, id] : g_.component_index) {
            if (g_.node(id).is_stub()) continue;
            if (label.size() > suffix.size() && label.compare(label.size() - suffix.size(), suffix.size(), suffix) == 0)
                if (best < 0 || id < best) best = id;
        }
        if (best >= 0) return best;
        std::map<std::string, std::string> attrs{{"stub", "true"}, {"name", path.substr(path.rfind('.') + 1)},
                                                 {"library", first_segment(path)}};
        return add_node(NodeKind::Component, path, std::move(attrs));
    }

    const Component* real_component(NodeId id) const {
        auto it = comp_by_id_.find(id);
        return it == comp_by_id_.end() ? nullptr : it->second;
    }

    static bool declares(const Component& c, const std::string& member) {
        auto named = [&](const auto& v) { return v.name == member; };
        return std::any_of(c.variables.begin(), c.variables.end(), named) ||
               std::any_of(c.parameters.begin(), c.parameters.end(), named) ||
               std::any_of(c.constants.begin(), c.constants.end(), named) ||
               std::any_of(c.instantiations.begin(), c.instantiations.end(),
                           [&](const Instantiation& i) { return i.instance_name == member; });
    }

    // Interface node for "inst.member..." inside component c.
    NodeId endpoint(const Component& c, const std::string& ref) {
        const std::string clean = strip_subscripts_and_space(ref);
        if (auto it = local_.find(c.qualified_name + "#" + first_segment(clean));
            it != local_.end() && clean.find('.') == std::string::npos)
            return it->second;
        const std::string label = c.qualified_name + "." + clean;
        if (auto it = by_label_.find(label); it != by_label_.end()) return it->second;

        bool stub = true;
        std::string type_name;
        const auto dot = clean.find('.');
        if (dot != std::string::npos) {
            const std::string inst = clean.substr(0, dot);
            std::string member = clean.substr(dot + 1);
            member = member.substr(0, member.find('.'));
            if (auto t = instance_type_.find(c.qualified_name + "#" + inst); t != instance_type_.end()) {
                type_name = g_.node(t->second).label;
                if (const Component* target = real_component(t->second)) stub = !declares(*target, member);
            }
        }
        std::map<std::string, std::string> attrs{{"owner", c.qualified_name}};
        if (!type_name.empty()) attrs["instance_type"] = type_name;
        if (stub) attrs["stub"] = "true";
        return add_node(NodeKind::Interface, label, std::move(attrs));
    }

    void add_members(const Component& c) {
        const NodeId self = g_.component_index.at(c.qualified_name);
        const std::string& qn = c.qualified_name;

        auto add_param = [&](const Parameter& p, bool constant) {
            std::map<std::string, std::string> attrs{{"owner", qn}, {"type_name", p.type_name}};
            if (p.default_value) attrs["default"] = *p.default_value;
            if (p.start_value) attrs["start"] = *p.start_value;
            if (!p.description.empty()) attrs["description"] = p.description;
            if (constant) attrs["constant"] = "true";
            local_[qn + "#" + p.name] = add_node(NodeKind::Parameter, qn + "." + p.name, std::move(attrs));
        };
        for (const auto& p : c.constants) add_param(p, true);
        for (const auto& p : c.parameters) add_param(p, false);

        for (const auto& v : c.variables) {
            std::map<std::string, std::string> attrs{{"owner", qn}, {"type_name", v.type_name}};
            if (v.start_value) attrs["start"] = *v.start_value;
            if (!v.description.empty()) attrs["description"] = v.description;
            if (v.causality == Causality::Input) attrs["causality"] = "input";
            if (v.causality == Causality::Output) attrs["causality"] = "output";
            local_[qn + "#" + v.name] = add_node(NodeKind::Interface, qn + "." + v.name, std::move(attrs));
        }

        for (const auto& base : c.extends_clauses) {
            if (is_builtin_type(base)) continue;
            add_edge(self, resolve_type(c, base), EdgeKind::Extension);
        }

        for (const auto& inst : c.instantiations) {
            const NodeId target = resolve_type(c, inst.type_path);
            instance_type_[qn + "#" + inst.instance_name] = target;
            add_edge(self, target, EdgeKind::Instantiation);
            const Component* tc = real_component(target);
            if (tc != nullptr && tc->kind == ComponentKind::Connector) {
                std::map<std::string, std::string> attrs{{"owner", qn}, {"type_name", inst.type_path}};
                if (!inst.description.empty()) attrs["description"] = inst.description;
                local_[qn + "#" + inst.instance_name] =
                    add_node(NodeKind::Connector, qn + "." + inst.instance_name, std::move(attrs));
            }
        }

        for (const auto& conn : c.connects) add_edge(endpoint(c, conn.lhs), endpoint(c, conn.rhs), EdgeKind::Connection);

        std::size_t index = 0;
        for (const auto& eq : c.equations) {
            ++index;
            std::map<std::string, std::string> attrs{{"owner", qn}, {"text", eq.text}};
            attrs["equation_kind"] = eq.kind == EquationKind::Derivative ? "derivative"
                                     : eq.kind == EquationKind::When    ? "when"
                                                                        : "simple";
            const NodeId eq_id = add_node(NodeKind::Equation, qn + ".eq" + std::to_string(index), std::move(attrs));
            for (const auto& path : referenced_paths(eq.text)) {
                const std::string head = first_segment(path);
                if (path.find('.') == std::string::npos) {
                    if (auto it = local_.find(qn + "#" + head); it != local_.end())
                        add_edge(eq_id, it->second, EdgeKind::Invocation);
                } else if (instance_type_.count(qn + "#" + head)) {
                    add_edge(eq_id, endpoint(c, path), EdgeKind::Invocation);
                }
            }
        }
    }

    struct EdgeKey {
        NodeId s, d;
        int k;
        bool operator<(const EdgeKey& o) const { return std::tie(s, d, k) < std::tie(o.s, o.d, o.k); }
    };

    const std::vector<Component>& comps_;
    std::map<std::string, const CorpusRecord*> records_;
    PropertyGraph g_;
    std::set<std::string> built_;
    std::map<NodeId, const Component*> comp_by_id_;
    std::unordered_map<std::string, NodeId> by_label_;
    std::unordered_map<std::string, NodeId> local_;          // "qn#name" -> member node
    std::unordered_map<std::string, NodeId> instance_type_;  // "qn#instance" -> type node
    std::set<EdgeKey> edge_set_;
};

}  // namespace

PropertyGraph build_graph(const std::vector<Component>& components, const std::vector<CorpusRecord>& corpus) {
    return GraphBuilder(components, corpus).build();
}

std::vector<Component> components_from_corpus(const std::vector<CorpusRecord>& corpus) {
    std::vector<Component> out;
    for (const auto& r : corpus) {
        try {
            for (auto& c : parse_unit(r.model, r.source))
                if (c.enclosing.empty()) out.push_back(std::move(c));
        } catch (const Error&) {
            // Records are validated on emit; a hand-edited corpus may still hold junk.
        }
    }
    return out;
}

std::vector<std::string> query_terms(std::string_view text) {
    std::vector<std::string> terms;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) terms.push_back(std::move(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (!std::isalnum(c)) {
            flush();
            continue;
        }
        if (std::isupper(c) && !cur.empty()) {
            const unsigned char prev = static_cast<unsigned char>(text[i - 1]);
            const bool next_lower = i + 1 < text.size() && std::islower(static_cast<unsigned char>(text[i + 1]));
            if (std::islower(prev) || std::isdigit(prev) || (std::isupper(prev) && next_lower)) flush();
        }
        cur += static_cast<char>(std::tolower(c));
    }
    flush();
    return terms;
}

double score_node(const GraphNode& node, const std::vector<std::string>& terms) {
    static const std::set<std::string> unscored = {"owner", "source", "stub", "restriction"};
    std::set<std::string> unique(terms.begin(), terms.end());
    auto count_in = [&](const std::vector<std::string>& hay) {
        double n = 0;
        for (const auto& t : hay)
            if (unique.count(t)) ++n;
        return n;
    };
    double score = 2.0 * count_in(query_terms(node.label));
    for (const auto& [key, value] : node.attributes)
        if (!unscored.count(key)) score += count_in(query_terms(value));
    return score;
}

RetrievalResult retrieve(const PropertyGraph& graph, std::string_view query, const RetrievalOptions& options) {
    RetrievalResult result;
    const auto terms = query_terms(query);
    if (terms.empty() || options.char_budget == 0) return result;

    std::vector<std::pair<double, NodeId>> scored;
    for (const auto& n : graph.nodes) {
        const double s = score_node(n, terms);
        if (s > 0) scored.emplace_back(s, n.id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (scored.size() > options.seeds) scored.resize(options.seeds);

    std::vector<std::vector<NodeId>> adj(graph.nodes.size());
    for (const auto& e : graph.edges) {
        adj[static_cast<std::size_t>(e.src)].push_back(e.dst);
        adj[static_cast<std::size_t>(e.dst)].push_back(e.src);
    }
    for (const auto& n : graph.nodes) {
        auto it = n.attributes.find("owner");
        if (it == n.attributes.end()) continue;
        if (auto o = graph.component_index.find(it->second); o != graph.component_index.end()) {
            adj[static_cast<std::size_t>(n.id)].push_back(o->second);
            adj[static_cast<std::size_t>(o->second)].push_back(n.id);
        }
    }

    std::map<NodeId, double> best;
    for (const auto& [seed_score, seed] : scored) {
        std::vector<long> dist(graph.nodes.size(), -1);
        std::deque<NodeId> queue{seed};
        dist[static_cast<std::size_t>(seed)] = 0;
        while (!queue.empty()) {
            const NodeId u = queue.front();
            queue.pop_front();
            const long du = dist[static_cast<std::size_t>(u)];
            const double s = seed_score / (1.0 + static_cast<double>(du));
            auto [it, inserted] = best.emplace(u, s);
            if (!inserted) it->second = std::max(it->second, s);
            if (static_cast<std::size_t>(du) >= options.hops) continue;
            for (NodeId v : adj[static_cast<std::size_t>(u)]) {
                if (dist[static_cast<std::size_t>(v)] >= 0) continue;
                dist[static_cast<std::size_t>(v)] = du + 1;
                queue.push_back(v);
            }
        }
    }

    struct Candidate {
        double score;
        NodeId id;
        std::string text;
    };
    std::vector<Candidate> cands;
    for (const auto& [id, s] : best) {
        const GraphNode& n = graph.node(id);
        if (n.kind != NodeKind::Component || n.is_stub()) continue;
        std::string text;
        for (const char* key : {"description", "documentation", "source"}) {
            auto it = n.attributes.find(key);
            if (it == n.attributes.end() || it->second.empty()) continue;
            if (!text.empty()) text += '\n';
            text += it->second;
        }
        if (!text.empty()) cands.push_back({s, id, std::move(text)});
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });

    std::set<std::string> seen;
    for (auto& c : cands) {
        if (!seen.insert(c.text).second) continue;
        if (result.total_chars + c.text.size() > options.char_budget) break;
        result.total_chars += c.text.size();
        result.snippets.push_back({c.score, graph.node(c.id).label, std::move(c.text)});
    }
    return result;
}

std::string graph_to_json(const PropertyGraph& graph) {
    ojson j;
    j["format_version"] = 1;
    ojson nodes = ojson::array();
    for (const auto& n : graph.nodes) {
        ojson jn;
        jn["id"] = n.id;
        jn["kind"] = to_string(n.kind);
        jn["label"] = n.label;
        jn["attributes"] = ojson::object();
        for (const auto& [k, v] : n.attributes) jn["attributes"][k] = v;
        nodes.push_back(std::move(jn));
    }
    ojson edges = ojson::array();
    for (const auto& e : graph.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", to_string(e.kind)}});
    j["nodes"] = std::move(nodes);
    j["edges"] = std::move(edges);
    return j.dump(1) + "\n";
}

namespace {

NodeKind node_kind_from(const std::string& s) {
    for (auto k : {NodeKind::Component, NodeKind::Connector, NodeKind::Equation, NodeKind::Parameter, NodeKind::Interface})
        if (to_string(k) == s) return k;
    throw FormatError("unknown node kind '" + s + "'");
}

EdgeKind edge_kind_from(const std::string& s) {
    for (auto k : {EdgeKind::Extension, EdgeKind::Connection, EdgeKind::Invocation, EdgeKind::Instantiation})
        if (to_string(k) == s) return k;
    throw FormatError("unknown edge kind '" + s + "'");
}

}  // namespace

PropertyGraph graph_from_json(std::string_view text) {
    PropertyGraph g;
    try {
        const auto j = nlohmann::json::parse(text);
        if (!j.is_object() || !j.contains("format_version")) throw FormatError("graph file has no format_version");
        if (j.at("format_version") != 1)
            throw FormatError("unsupported graph format_version " + j.at("format_version").dump());
        for (const auto& jn : j.at("nodes")) {
            GraphNode n;
            n.id = jn.at("id").get<NodeId>();
            n.kind = node_kind_from(jn.at("kind").get<std::string>());
            n.label = jn.at("label").get<std::string>();
            for (const auto& [k, v] : jn.at("attributes").items()) n.attributes[k] = v.get<std::string>();
            if (n.id != static_cast<NodeId>(g.nodes.size())) throw FormatError("node ids must be dense and ordered");
            if (n.label.empty()) throw FormatError("node " + std::to_string(n.id) + " has an empty label");
            if (n.kind == NodeKind::Component) g.component_index.emplace(n.label, n.id);
            g.nodes.push_back(std::move(n));
        }
        const auto count = static_cast<NodeId>(g.nodes.size());
        for (const auto& je : j.at("edges")) {
            GraphEdge e{je.at("src").get<NodeId>(), je.at("dst").get<NodeId>(),
                        edge_kind_from(je.at("kind").get<std::string>())};
            if (e.src < 0 || e.src >= count || e.dst < 0 || e.dst >= count)
                throw FormatError("edge endpoint out of range");
            if (e.kind == EdgeKind::Extension && e.src == e.dst) throw FormatError("self-loop extension edge");
            g.edges.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed graph file: ") + e.what());
    }
    return g;
}

void save_graph(const PropertyGraph& graph, const std::filesystem::path& path) {
    write_file_atomic(path, graph_to_json(graph));
}

PropertyGraph load_graph(const std::filesystem::path& path) { return graph_from_json(read_file(path)); }

}  // namespace modigen
