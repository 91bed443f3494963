#ifndef DOCAUSAL_DAG_HPP
#define DOCAUSAL_DAG_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "docausal/error.hpp"

namespace docausal {

using NodeSet = std::set<std::string>;

struct Edge {
    std::string parent;
    std::string child;

    auto operator<=>(const Edge&) const = default;
};

class DagError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DagSyntaxError : public DagError {
public:
    DagSyntaxError(std::size_t line, std::size_t column, const std::string& what)
        : DagError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

class DagCycleError : public DagError {
public:
    explicit DagCycleError(std::vector<std::string> cycle)
        : DagError(describe(cycle)), cycle_(std::move(cycle)) {}

    // Nodes along one directed cycle; the first node is repeated at the end.
    const std::vector<std::string>& cycle() const { return cycle_; }

private:
    static std::string describe(const std::vector<std::string>& cycle) {
        std::string s = "graph contains a cycle: ";
        for (std::size_t i = 0; i < cycle.size(); ++i) {
            if (i) s += " -> ";
            s += cycle[i];
        }
        return s;
    }

    std::vector<std::string> cycle_;
};

/*
 * Immutable directed acyclic graph over named nodes. Node order is the
 * declaration order; equality ignores both node and edge order.
 */
class Dag {
public:
    Dag() = default;

    Dag(std::vector<std::string> nodes, std::vector<Edge> edges)
        : nodes_(std::move(nodes)), edges_(std::move(edges)) {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!is_identifier(nodes_[i])) {
                throw DagError("invalid node name '" + nodes_[i] + "'");
            }
            if (!index_.emplace(nodes_[i], i).second) {
                throw DagError("duplicate node '" + nodes_[i] + "'");
            }
        }
        parents_.resize(nodes_.size());
        children_.resize(nodes_.size());
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& e : edges_) {
            auto p = index_.find(e.parent);
            auto c = index_.find(e.child);
            if (p == index_.end()) throw DagError("edge references undeclared node '" + e.parent + "'");
            if (c == index_.end()) throw DagError("edge references undeclared node '" + e.child + "'");
            if (p->second == c->second) throw DagError("self-loop on node '" + e.parent + "'");
            if (!seen.emplace(p->second, c->second).second) {
                throw DagError("duplicate edge " + e.parent + " -> " + e.child);
            }
            children_[p->second].push_back(c->second);
            parents_[c->second].push_back(p->second);
        }
        topo_ = topological_order_or_throw();
    }

    static bool is_identifier(std::string_view s) {
        if (s.empty()) return false;
        auto head = static_cast<unsigned char>(s[0]);
        if (!(std::isalpha(head) || s[0] == '_')) return false;
        return std::all_of(s.begin() + 1, s.end(), [](char ch) {
            auto u = static_cast<unsigned char>(ch);
            return std::isalnum(u) || ch == '_';
        });
    }

    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t size() const { return nodes_.size(); }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ValidationError("unknown node '" + name + "'");
        return it->second;
    }

    const std::string& name_of(std::size_t i) const { return nodes_.at(i); }

    const std::vector<std::size_t>& parent_indices(std::size_t i) const { return parents_.at(i); }
    const std::vector<std::size_t>& child_indices(std::size_t i) const { return children_.at(i); }

    NodeSet parents(const std::string& name) const { return names(parents_[index_of(name)]); }
    NodeSet children(const std::string& name) const { return names(children_[index_of(name)]); }

    bool has_edge(const std::string& parent, const std::string& child) const {
        const auto& ch = children_[index_of(parent)];
        return std::find(ch.begin(), ch.end(), index_of(child)) != ch.end();
    }

    bool adjacent(const std::string& a, const std::string& b) const {
        return has_edge(a, b) || has_edge(b, a);
    }

    const std::vector<std::size_t>& topological_order() const { return topo_; }

    // Same graph with every edge leaving `node` deleted.
    Dag without_outgoing(const std::string& node) const {
        index_of(node);
        std::vector<Edge> kept;
        for (const auto& e : edges_) {
            if (e.parent != node) kept.push_back(e);
        }
        return Dag(nodes_, std::move(kept));
    }

    friend bool operator==(const Dag& a, const Dag& b) {
        std::vector<std::string> na = a.nodes_, nb = b.nodes_;
        std::sort(na.begin(), na.end());
        std::sort(nb.begin(), nb.end());
        if (na != nb) return false;
        std::vector<Edge> ea = a.edges_, eb = b.edges_;
        std::sort(ea.begin(), ea.end());
        std::sort(eb.begin(), eb.end());
        return ea == eb;
    }

private:
    NodeSet names(const std::vector<std::size_t>& ids) const {
        NodeSet out;
        for (auto i : ids) out.insert(nodes_[i]);
        return out;
    }

    std::vector<std::size_t> topological_order_or_throw() const {
        // Kahn's algorithm; on failure a DFS over the remaining nodes extracts one cycle.
        std::vector<std::size_t> in_degree(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) in_degree[i] = parents_[i].size();
        std::deque<std::size_t> ready;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (in_degree[i] == 0) ready.push_back(i);
        }
        std::vector<std::size_t> order;
        while (!ready.empty()) {
            auto v = ready.front();
            ready.pop_front();
            order.push_back(v);
            for (auto c : children_[v]) {
                if (--in_degree[c] == 0) ready.push_back(c);
            }
        }
        if (order.size() == nodes_.size()) return order;

        // Every remaining node has a remaining parent, so walking parents must revisit a node.
        std::size_t start = 0;
        while (in_degree[start] == 0) ++start;
        std::vector<std::size_t> walk;
        std::vector<long> pos(nodes_.size(), -1);
        std::size_t v = start;
        while (pos[v] < 0) {
            pos[v] = static_cast<long>(walk.size());
            walk.push_back(v);
            for (auto p : parents_[v]) {
                if (in_degree[p] != 0) {
                    v = p;
                    break;
                }
            }
        }
        // walk[k + 1] is a parent of walk[k]; read the loop back in edge direction
        std::vector<std::string> cycle{nodes_[v]};
        for (std::size_t k = walk.size(); k-- > static_cast<std::size_t>(pos[v]) + 1;) {
            cycle.push_back(nodes_[walk[k]]);
        }
        cycle.push_back(nodes_[v]);
        throw DagCycleError(std::move(cycle));
    }

    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> topo_;
};

// ---------------------------------------------------------------------------
// Text format
//
//   # comment
//   AGE;
//   AGE -> SYSBP;
//
// Statements end with ';'. Several statements may share a line.
// ---------------------------------------------------------------------------

inline Dag parse_dag(std::string_view text) {
    std::vector<std::string> nodes;
    std::vector<Edge> edges;

    struct Token {
        enum Kind { Ident, Arrow, Semi } kind;
        std::string text;
        std::size_t column;
    };

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        std::vector<Token> tokens;
        std::size_t i = 0;
        while (i < line.size()) {
            char ch = line[i];
            if (ch == ' ' || ch == '\t' || ch == '\r') {
                ++i;
            } else if (ch == ';') {
                tokens.push_back({Token::Semi, ";", i + 1});
                ++i;
            } else if (ch == '-' && i + 1 < line.size() && line[i + 1] == '>') {
                tokens.push_back({Token::Arrow, "->", i + 1});
                i += 2;
            } else if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
                std::size_t j = i + 1;
                while (j < line.size() &&
                       (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_')) {
                    ++j;
                }
                tokens.push_back({Token::Ident, std::string(line.substr(i, j - i)), i + 1});
                i = j;
            } else {
                throw DagSyntaxError(line_no, i + 1, std::string("unexpected character '") + ch + "'");
            }
        }

        std::size_t t = 0;
        auto expect = [&](Token::Kind kind, const char* what) -> const Token& {
            if (t >= tokens.size()) throw DagSyntaxError(line_no, line.size() + 1, std::string("expected ") + what);
            if (tokens[t].kind != kind) {
                throw DagSyntaxError(line_no, tokens[t].column,
                                     std::string("expected ") + what + ", found '" + tokens[t].text + "'");
            }
            return tokens[t++];
        };
        while (t < tokens.size()) {
            const auto& first = expect(Token::Ident, "node name");
            if (t < tokens.size() && tokens[t].kind == Token::Arrow) {
                ++t;
                const auto& second = expect(Token::Ident, "node name");
                expect(Token::Semi, "';'");
                edges.push_back({first.text, second.text});
            } else {
                expect(Token::Semi, "'->' or ';'");
                if (std::find(nodes.begin(), nodes.end(), first.text) != nodes.end()) {
                    throw DagSyntaxError(line_no, first.column, "duplicate node '" + first.text + "'");
                }
                nodes.push_back(first.text);
            }
        }
        pos = end + 1;
    }
    return Dag(std::move(nodes), std::move(edges));
}

inline std::string render_dag(const Dag& dag) {
    std::ostringstream out;
    for (const auto& n : dag.nodes()) out << n << ";\n";
    for (const auto& e : dag.edges()) out << e.parent << " -> " << e.child << ";\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Identification queries
// ---------------------------------------------------------------------------

inline NodeSet descendants(const Dag& dag, const std::string& node) {
    std::vector<bool> seen(dag.size(), false);
    std::vector<std::size_t> stack{dag.index_of(node)};
    NodeSet out;
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto c : dag.child_indices(v)) {
            if (!seen[c]) {
                seen[c] = true;
                out.insert(dag.name_of(c));
                stack.push_back(c);
            }
        }
    }
    return out;
}

inline NodeSet ancestors(const Dag& dag, const std::string& node) {
    std::vector<bool> seen(dag.size(), false);
    std::vector<std::size_t> stack{dag.index_of(node)};
    NodeSet out;
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto p : dag.parent_indices(v)) {
            if (!seen[p]) {
                seen[p] = true;
                out.insert(dag.name_of(p));
                stack.push_back(p);
            }
        }
    }
    return out;
}

namespace detail {

inline void check_query(const Dag& dag, const std::string& x, const std::string& y, const NodeSet& cond) {
    dag.index_of(x);
    dag.index_of(y);
    for (const auto& c : cond) dag.index_of(c);
    if (x == y) throw ValidationError("d-separation query needs two distinct nodes, got '" + x + "' twice");
    if (cond.count(x) || cond.count(y)) {
        throw ValidationError("conditioning set must not contain the query nodes");
    }
}

}  // namespace detail

/*
 * Reachability ("Bayes ball") test. A trail may pass a non-collider only when
 * it is unobserved, and a collider only when it or one of its descendants is
 * observed.
 */
inline bool d_separated(const Dag& dag, const std::string& x, const std::string& y, const NodeSet& cond) {
    detail::check_query(dag, x, y, cond);
    const std::size_t n = dag.size();

    std::vector<bool> observed(n, false);
    for (const auto& c : cond) observed[dag.index_of(c)] = true;

    // observed nodes and their ancestors open colliders
    std::vector<bool> opens_collider(n, false);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (observed[i]) {
            opens_collider[i] = true;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        auto v = stack.back();
        stack.pop_back();
        for (auto p : dag.parent_indices(v)) {
            if (!opens_collider[p]) {
                opens_collider[p] = true;
                stack.push_back(p);
            }
        }
    }

    // state = node * 2 + (1 if arrived from a parent, 0 if arrived from a child)
    std::vector<bool> visited(2 * n, false);
    std::deque<std::size_t> queue{2 * dag.index_of(x)};
    const std::size_t target = dag.index_of(y);
    while (!queue.empty()) {
        auto state = queue.front();
        queue.pop_front();
        if (visited[state]) continue;
        visited[state] = true;
        const std::size_t v = state / 2;
        const bool from_parent = state % 2 == 1;
        if (v == target) return false;

        if (!from_parent) {
            if (!observed[v]) {
                for (auto p : dag.parent_indices(v)) queue.push_back(2 * p);
                for (auto c : dag.child_indices(v)) queue.push_back(2 * c + 1);
            }
        } else {
            if (!observed[v]) {
                for (auto c : dag.child_indices(v)) queue.push_back(2 * c + 1);
            }
            if (opens_collider[v]) {
                for (auto p : dag.parent_indices(v)) queue.push_back(2 * p);
            }
        }
    }
    return true;
}

struct DescendantOfTreatment {
    std::string node;
    bool operator==(const DescendantOfTreatment&) const = default;
};

struct OpenBackdoorPath {
    std::vector<std::string> path;
    bool operator==(const OpenBackdoorPath&) const = default;
};

using BackdoorViolation = std::variant<DescendantOfTreatment, OpenBackdoorPath>;

struct BackdoorVerdict {
    bool valid = true;
    std::vector<BackdoorViolation> violations;
};

namespace detail {

// Is the given trail open under `cond`? Collider status is judged in `dag`.
inline bool trail_open(const Dag& dag, const std::vector<std::size_t>& trail, const std::vector<bool>& observed,
                       const std::vector<bool>& opens_collider) {
    for (std::size_t k = 1; k + 1 < trail.size(); ++k) {
        const auto prev = trail[k - 1], mid = trail[k], next = trail[k + 1];
        const auto& pa = dag.parent_indices(mid);
        const bool into_from_prev = std::find(pa.begin(), pa.end(), prev) != pa.end();
        const bool into_from_next = std::find(pa.begin(), pa.end(), next) != pa.end();
        if (into_from_prev && into_from_next) {
            if (!opens_collider[mid]) return false;
        } else if (observed[mid]) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

// Enumeration of open back-door paths stops after this many have been found.
inline constexpr std::size_t kMaxReportedPaths = 64;

inline BackdoorVerdict is_valid_backdoor(const Dag& dag, const std::string& treatment, const std::string& outcome,
                                         const NodeSet& z) {
    const auto t = dag.index_of(treatment);
    const auto y = dag.index_of(outcome);
    for (const auto& c : z) dag.index_of(c);
    if (t == y) throw ValidationError("treatment and outcome must differ");

    BackdoorVerdict verdict;
    const auto desc = descendants(dag, treatment);
    for (const auto& c : z) {
        if (desc.count(c)) verdict.violations.push_back(DescendantOfTreatment{c});
    }

    // Back-door paths are exactly the T–Y trails in the graph with T's outgoing edges removed.
    const Dag cut = dag.without_outgoing(treatment);
    NodeSet cond;
    for (const auto& c : z) {
        if (c != treatment && c != outcome) cond.insert(c);
    }
    if (!d_separated(cut, treatment, outcome, cond)) {
        const std::size_t n = cut.size();
        std::vector<bool> observed(n, false), opens(n, false);
        for (const auto& c : cond) observed[cut.index_of(c)] = true;
        for (const auto& c : cond) {
            opens[cut.index_of(c)] = true;
            for (const auto& a : ancestors(cut, c)) opens[cut.index_of(a)] = true;
        }
        std::vector<std::size_t> trail{t};
        std::vector<bool> on_trail(n, false);
        on_trail[t] = true;
        std::size_t found = 0;
        auto dfs = [&](auto&& self, std::size_t v) -> void {
            if (found >= kMaxReportedPaths) return;
            if (v == y) {
                if (detail::trail_open(cut, trail, observed, opens)) {
                    std::vector<std::string> names;
                    for (auto i : trail) names.push_back(cut.name_of(i));
                    verdict.violations.push_back(OpenBackdoorPath{std::move(names)});
                    ++found;
                }
                return;
            }
            std::vector<std::size_t> next(cut.parent_indices(v));
            next.insert(next.end(), cut.child_indices(v).begin(), cut.child_indices(v).end());
            std::sort(next.begin(), next.end());
            for (auto w : next) {
                if (on_trail[w]) continue;
                on_trail[w] = true;
                trail.push_back(w);
                self(self, w);
                trail.pop_back();
                on_trail[w] = false;
            }
        };
        dfs(dfs, t);
    }
    verdict.valid = verdict.violations.empty();
    return verdict;
}

inline std::string describe(const BackdoorViolation& v) {
    if (const auto* d = std::get_if<DescendantOfTreatment>(&v)) {
        return "descendant-of-treatment: " + d->node;
    }
    const auto& p = std::get<OpenBackdoorPath>(v).path;
    std::string s = "open-backdoor-path:";
    for (const auto& n : p) s += " " + n;
    return s;
}

struct Implication {
    std::string x;
    std::string y;
    NodeSet cond;
    bool operator==(const Implication&) const = default;
};

/*
 * One implication per non-adjacent pair, conditioning on the union of both
 * nodes' parents. Pairs are ordered by name; within a pair x < y.
 */
inline std::vector<Implication> testable_implications(const Dag& dag, std::size_t max_cond_size) {
    std::vector<std::string> names = dag.nodes();
    std::sort(names.begin(), names.end());
    std::vector<Implication> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            const auto& x = names[i];
            const auto& y = names[j];
            if (dag.adjacent(x, y)) continue;
            NodeSet cond = dag.parents(x);
            auto py = dag.parents(y);
            cond.insert(py.begin(), py.end());
            cond.erase(x);
            cond.erase(y);
            if (cond.size() > max_cond_size) continue;
            if (d_separated(dag, x, y, cond)) out.push_back({x, y, std::move(cond)});
        }
    }
    return out;
}

}  // namespace docausal

#endif  // DOCAUSAL_DAG_HPP
