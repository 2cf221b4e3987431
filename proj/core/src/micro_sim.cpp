// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <unordered_map>

#include "modigen/error.hpp"
#include "modigen/parser.hpp"
#include "modigen/simbackend.hpp"

namespace modigen {
namespace {

enum class Op { Const, Slot, Pre, Neg, Not, Add, Sub, Mul, Div, Pow, Lt, Le, Gt, Ge, Eq, Ne, And, Or, If, Sin, Cos, Exp, Sqrt, Abs };

struct Code {
    Op op = Op::Const;
    double value = 0.0;
    int slot = -1;
    std::vector<Code> kids;
};

double eval(const Code& c, const std::vector<double>& cur, const std::vector<double>& pre) {
    auto k = [&](std::size_t i) { return eval(c.kids[i], cur, pre); };
    switch (c.op) {
        case Op::Const: return c.value;
        case Op::Slot: return cur[static_cast<std::size_t>(c.slot)];
        case Op::Pre: return pre[static_cast<std::size_t>(c.slot)];
        case Op::Neg: return -k(0);
        case Op::Not: return k(0) != 0.0 ? 0.0 : 1.0;
        case Op::Add: return k(0) + k(1);
        case Op::Sub: return k(0) - k(1);
        case Op::Mul: return k(0) * k(1);
        case Op::Div: return k(0) / k(1);
        case Op::Pow: return std::pow(k(0), k(1));
        case Op::Lt: return k(0) < k(1) ? 1.0 : 0.0;
        case Op::Le: return k(0) <= k(1) ? 1.0 : 0.0;
        case Op::Gt: return k(0) > k(1) ? 1.0 : 0.0;
        case Op::Ge: return k(0) >= k(1) ? 1.0 : 0.0;
        case Op::Eq: return k(0) == k(1) ? 1.0 : 0.0;
        case Op::Ne: return k(0) != k(1) ? 1.0 : 0.0;
        case Op::And: return (k(0) != 0.0 && k(1) != 0.0) ? 1.0 : 0.0;
        case Op::Or: return (k(0) != 0.0 || k(1) != 0.0) ? 1.0 : 0.0;
        case Op::If: {
            const std::size_t n = c.kids.size();
            for (std::size_t i = 0; i + 1 < n; i += 2)
                if (k(i) != 0.0) return k(i + 1);
            return k(n - 1);
        }
        case Op::Sin: return std::sin(k(0));
        case Op::Cos: return std::cos(k(0));
        case Op::Exp: return std::exp(k(0));
        case Op::Sqrt: return std::sqrt(k(0));
        case Op::Abs: return std::fabs(k(0));
    }
    return 0.0;
}

struct Assignment {
    int slot;
    Code rhs;
};

struct WhenClause {
    Code condition;
    std::vector<Assignment> reinits;
};

struct Program {
    std::vector<std::string> slot_names;  // slot 0 is time
    std::vector<double> initial;
    std::vector<int> variable_slots;      // output order
    std::vector<int> state_slots;
    std::vector<Code> derivatives;        // parallel to state_slots
    std::vector<Assignment> algebraics;
    std::vector<WhenClause> whens;
};

class Compiler {
public:
    explicit Compiler(const Component& c) : c_(c) {}

    Program compile() {
        switch (c_.kind) {
            case ComponentKind::Model:
            case ComponentKind::Block:
            case ComponentKind::Class: break;
            default:
                throw UnsupportedConstruct("'" + c_.name + "' is a " + std::string(to_string(c_.kind)) +
                                           ", not a simulatable model");
        }
        if (!c_.instantiations.empty())
            throw UnsupportedConstruct("component instances are not supported (found '" +
                                       c_.instantiations.front().instance_name + "')");
        if (!c_.extends_clauses.empty())
            throw UnsupportedConstruct("extends clauses are not supported (found '" + c_.extends_clauses.front() + "')");
        if (!c_.connects.empty()) throw UnsupportedConstruct("connect equations are not supported");

        add_slot("time", 0.0);
        for (const auto* group : {&c_.constants, &c_.parameters}) {
            for (const Parameter& p : *group) {
                if (p.type_name != "Real" && p.type_name != "Integer" && p.type_name != "Boolean")
                    throw UnsupportedConstruct("parameter '" + p.name + "' has unsupported type " + p.type_name);
                double v = 0.0;
                if (p.default_value)
                    v = constant_value(*p.default_value, "value of '" + p.name + "'");
                else if (p.start_value)
                    v = constant_value(*p.start_value, "start of '" + p.name + "'");
                constants_.insert(add_slot(p.name, v));
            }
        }
        for (const Variable& v : c_.variables) {
            if (v.type_name != "Real" && v.type_name != "Boolean")
                throw UnsupportedConstruct("variable '" + v.name + "' has unsupported type " + v.type_name);
            double start = 0.0;
            if (v.start_value) start = constant_value(*v.start_value, "start of '" + v.name + "'");
            const int s = add_slot(v.name, start);
            prog_.variable_slots.push_back(s);
            if (v.type_name == "Boolean") boolean_.insert(s);
        }

        for (const Equation& e : c_.equations) {
            if (e.kind != EquationKind::Derivative) continue;
            const int s = variable_slot(e.state, "der()");
            if (state_.count(s)) throw UnsupportedConstruct("more than one der() equation for '" + e.state + "'");
            if (boolean_.count(s)) throw UnsupportedConstruct("der() of Boolean '" + e.state + "'");
            state_.insert(s);
            prog_.state_slots.push_back(s);
            prog_.derivatives.push_back(compile_expr(*e.rhs, false));
        }

        std::map<int, int> definitions;
        auto define = [&](int slot, Code rhs) {
            if (state_.count(slot))
                throw UnsupportedConstruct("state '" + prog_.slot_names[static_cast<std::size_t>(slot)] +
                                           "' also has an algebraic equation");
            if (++definitions[slot] > 1)
                throw UnsupportedConstruct("variable '" + prog_.slot_names[static_cast<std::size_t>(slot)] +
                                           "' is defined by more than one equation");
            prog_.algebraics.push_back({slot, std::move(rhs)});
        };
        for (const Variable& v : c_.variables)
            if (v.binding) define(slot_of(v.name), compile_expr(parse_expression(*v.binding), false));

        for (const Equation& e : c_.equations) {
            if (e.kind == EquationKind::Derivative) continue;
            if (e.kind == EquationKind::When) {
                compile_when(e);
                continue;
            }
            if (!e.lhs || !e.rhs)
                throw UnsupportedConstruct("equation '" + e.text + "' is not of the form variable = expression");
            if (!e.lhs->is_reference())
                throw UnsupportedConstruct("implicit equation '" + e.text + "'; the left side must be a single variable");
            define(variable_slot(e.lhs->text, "equation"), compile_expr(*e.rhs, false));
        }

        for (int s : prog_.variable_slots) {
            if (!state_.count(s) && !definitions.count(s))
                throw UnsupportedConstruct("variable '" + prog_.slot_names[static_cast<std::size_t>(s)] +
                                           "' has no defining equation");
        }
        return std::move(prog_);
    }

private:
    int add_slot(const std::string& name, double value) {
        if (slots_.count(name)) throw UnsupportedConstruct("duplicate name '" + name + "'");
        const int s = static_cast<int>(prog_.slot_names.size());
        slots_[name] = s;
        prog_.slot_names.push_back(name);
        prog_.initial.push_back(value);
        return s;
    }

    int slot_of(const std::string& name) const {
        auto it = slots_.find(name);
        if (it == slots_.end()) throw UnsupportedConstruct("undefined identifier '" + name + "'");
        return it->second;
    }

    int variable_slot(const std::string& name, const char* context) const {
        const int s = slot_of(name);
        if (s == 0 || constants_.count(s))
            throw UnsupportedConstruct(std::string(context) + " assigns to non-variable '" + name + "'");
        return s;
    }

    double constant_value(const std::string& text, const std::string& what) {
        Code code = compile_expr(parse_expression(text), false);
        if (!only_constants(code)) throw UnsupportedConstruct(what + " is not a constant expression");
        return eval(code, prog_.initial, prog_.initial);
    }

    bool only_constants(const Code& c) const {
        if ((c.op == Op::Slot || c.op == Op::Pre) && !constants_.count(c.slot)) return false;
        for (const auto& k : c.kids)
            if (!only_constants(k)) return false;
        return true;
    }

    void compile_when(const Equation& e) {
        if (e.has_elsewhen) throw UnsupportedConstruct("elsewhen is not supported");
        WhenClause w;
        w.condition = compile_expr(*e.condition, true);
        for (const WhenAction& a : e.actions) {
            if (a.kind != WhenAction::Kind::Reinit)
                throw UnsupportedConstruct("when-equation body may only contain reinit (found '" + a.text + "')");
            const int s = variable_slot(a.target, "reinit");
            if (!state_.count(s)) throw UnsupportedConstruct("reinit of non-state '" + a.target + "'");
            w.reinits.push_back({s, compile_expr(a.value, true)});
        }
        prog_.whens.push_back(std::move(w));
    }

    Code unary(Op op, Code a) {
        Code c;
        c.op = op;
        c.kids.push_back(std::move(a));
        return c;
    }

    Code compile_expr(const Expr& e, bool allow_pre) {
        Code c;
        switch (e.kind) {
            case ExprKind::Number:
            case ExprKind::Boolean:
                c.value = e.number;
                return c;
            case ExprKind::Reference:
                if (e.text.find_first_of(".[") != std::string::npos)
                    throw UnsupportedConstruct("qualified or subscripted reference '" + e.text + "'");
                c.op = Op::Slot;
                c.slot = slot_of(e.text);
                return c;
            case ExprKind::Unary:
                if (e.text == "-") return unary(Op::Neg, compile_expr(e.args[0], allow_pre));
                if (e.text == "not") return unary(Op::Not, compile_expr(e.args[0], allow_pre));
                return compile_expr(e.args[0], allow_pre);
            case ExprKind::Binary: {
                static const std::map<std::string, Op> ops = {
                    {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"/", Op::Div}, {"^", Op::Pow},
                    {"<", Op::Lt},  {"<=", Op::Le}, {">", Op::Gt},  {">=", Op::Ge}, {"==", Op::Eq},
                    {"<>", Op::Ne}, {"and", Op::And}, {"or", Op::Or}};
                auto it = ops.find(e.text);
                if (it == ops.end()) throw UnsupportedConstruct("operator '" + e.text + "'");
                c.op = it->second;
                c.kids.push_back(compile_expr(e.args[0], allow_pre));
                c.kids.push_back(compile_expr(e.args[1], allow_pre));
                return c;
            }
            case ExprKind::If:
                c.op = Op::If;
                for (const auto& a : e.args) c.kids.push_back(compile_expr(a, allow_pre));
                return c;
            case ExprKind::Call: {
                for (const auto& n : e.arg_names)
                    if (!n.empty()) throw UnsupportedConstruct("named argument in call to " + e.text);
                if (e.text == "pre") {
                    if (!allow_pre) throw UnsupportedConstruct("pre() outside a when-equation");
                    if (e.args.size() != 1 || !e.args[0].is_reference())
                        throw UnsupportedConstruct("pre() takes a single variable");
                    c.op = Op::Pre;
                    c.slot = slot_of(e.args[0].text);
                    return c;
                }
                static const std::map<std::string, Op> funcs = {
                    {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}, {"sqrt", Op::Sqrt}, {"abs", Op::Abs}};
                auto it = funcs.find(e.text);
                if (it == funcs.end()) throw UnsupportedConstruct("function '" + e.text + "'");
                if (e.args.size() != 1) throw UnsupportedConstruct(e.text + "() takes one argument");
                return unary(it->second, compile_expr(e.args[0], allow_pre));
            }
            default:
                throw UnsupportedConstruct("expression form not supported by the micro backend");
        }
    }

    const Component& c_;
    Program prog_;
    std::unordered_map<std::string, int> slots_;
    std::set<int> constants_;
    std::set<int> state_;
    std::set<int> boolean_;
};

}  // namespace

std::size_t micro_sample_count(const SimSettings& settings) {
    return static_cast<std::size_t>(std::floor(settings.stop_time / settings.step * (1.0 + 1e-12))) + 1;
}

std::vector<Trajectory> micro_simulate(const Component& component, const SimSettings& settings) {
    if (!(settings.stop_time > 0.0) || !(settings.step > 0.0))
        throw UnsupportedConstruct("stop_time and step must be positive");
    const Program p = Compiler(component).compile();
    const double h = settings.step;
    const std::size_t n = micro_sample_count(settings);

    std::vector<double> x = p.initial;
    std::vector<double> deriv(p.state_slots.size());
    std::vector<char> memory(p.whens.size());
    std::vector<std::vector<double>> samples(p.variable_slots.size(), std::vector<double>(n));
    std::vector<double> times(n);

    auto algebraics = [&] {
        for (const auto& a : p.algebraics) x[static_cast<std::size_t>(a.slot)] = eval(a.rhs, x, x);
    };
    auto record = [&](std::size_t k) {
        times[k] = x[0];
        for (std::size_t i = 0; i < p.variable_slots.size(); ++i) {
            const double v = x[static_cast<std::size_t>(p.variable_slots[i])];
            if (!std::isfinite(v))
                throw NumericError(p.slot_names[static_cast<std::size_t>(p.variable_slots[i])], x[0]);
            samples[i][k] = v;
        }
    };

    x[0] = 0.0;
    algebraics();
    for (std::size_t w = 0; w < p.whens.size(); ++w) memory[w] = eval(p.whens[w].condition, x, x) != 0.0;
    record(0);

    for (std::size_t k = 1; k < n; ++k) {
        for (std::size_t i = 0; i < p.state_slots.size(); ++i) deriv[i] = eval(p.derivatives[i], x, x);
        for (std::size_t i = 0; i < p.state_slots.size(); ++i) x[static_cast<std::size_t>(p.state_slots[i])] += h * deriv[i];
        x[0] = static_cast<double>(k) * h;
        algebraics();

        bool fired = false;
        const std::vector<double> pre = x;
        for (std::size_t w = 0; w < p.whens.size(); ++w) {
            const bool now = eval(p.whens[w].condition, pre, pre) != 0.0;
            if (now && !memory[w]) {
                // All reinit values see the pre-event state, then are applied together.
                std::vector<double> values;
                for (const auto& r : p.whens[w].reinits) values.push_back(eval(r.rhs, pre, pre));
                for (std::size_t i = 0; i < values.size(); ++i)
                    x[static_cast<std::size_t>(p.whens[w].reinits[i].slot)] = values[i];
                fired = true;
            }
            memory[w] = now;
        }
        if (fired) algebraics();
        record(k);
    }

    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < p.variable_slots.size(); ++i) {
        const std::string& name = p.slot_names[static_cast<std::size_t>(p.variable_slots[i])];
        if (!settings.output_variables.empty() &&
            std::find(settings.output_variables.begin(), settings.output_variables.end(), name) ==
                settings.output_variables.end())
            continue;
        out.push_back({name, times, std::move(samples[i])});
    }
    return out;
}

namespace {

class MicroSession final : public BackendSession {
public:
    StageResult load_code(std::string_view code) override {
        std::vector<Component> comps;
        try {
            comps = parse_unit(code);
        } catch (const SourceError& e) {
            return {false, {error_diagnostic(Stage::Load, e.message(), e.line(), e.column())}};
        }
        if (comps.empty()) return {false, {error_diagnostic(Stage::Load, "no class definition found")}};
        for (auto& c : comps) {
            const std::string qn = c.qualified_name;
            const std::string name = c.name;
            auto shared = std::make_shared<Component>(std::move(c));
            classes_[qn] = shared;
            if (shared->enclosing.empty()) classes_[name] = shared;
        }
        return {};
    }

    StageResult load_library(std::string_view name) override {
        for (const auto& [qn, c] : classes_)
            if (qn == name || qn.rfind(std::string(name) + ".", 0) == 0) return {};
        return {false, {error_diagnostic(Stage::Load, "library '" + std::string(name) +
                                                          "' is not available to the micro backend")}};
    }

    StageResult check(std::string_view model_name) override {
        auto it = classes_.find(std::string(model_name));
        if (it == classes_.end())
            return {false, {error_diagnostic(Stage::Check, "class '" + std::string(model_name) + "' not found")}};
        const Component& c = *it->second;
        if (c.kind != ComponentKind::Model && c.kind != ComponentKind::Block && c.kind != ComponentKind::Class)
            return {};
        try {
            SimSettings probe;
            probe.stop_time = probe.step;
            micro_simulate(c, probe);
        } catch (const UnsupportedConstruct& e) {
            return {false, {error_diagnostic(Stage::Check, e.what(), c.line)}};
        } catch (const Error&) {
            // Numeric trouble is a simulation-time failure, not a check failure.
        }
        return {};
    }

    SimulationResult simulate(std::string_view model_name, const SimSettings& settings) override {
        auto it = classes_.find(std::string(model_name));
        if (it == classes_.end())
            return {false, {}, {error_diagnostic(Stage::Simulate, "class '" + std::string(model_name) + "' not found")}};
        try {
            return {true, micro_simulate(*it->second, settings), {}};
        } catch (const Error& e) {
            return {false, {}, {error_diagnostic(Stage::Simulate, e.what())}};
        }
    }

private:
    std::map<std::string, std::shared_ptr<Component>> classes_;
};

}  // namespace

std::unique_ptr<BackendSession> make_micro_backend() { return std::make_unique<MicroSession>(); }

}  // namespace modigen
