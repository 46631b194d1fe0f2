#pragma once

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ldsq/common.hpp"
#include "ldsq/noise.hpp"
#include "ldsq/zoo.hpp"

namespace ldsq {

// Structured-text problem and sweep specs: atoms, nested brace blocks, '#'
// comments. Grammar and the per-kind keys are documented in
// docs/spec_format.md; floating values are plain decimals and survive a
// write/read round trip at 17 significant digits.

struct SpecNode {
    bool is_block = false;
    std::string atom;
    std::vector<SpecNode> items;

    // key-value convention inside blocks: "key value" as consecutive items
    const SpecNode* find(const std::string& key) const {
        for (std::size_t i = 0; i + 1 < items.size(); ++i)
            if (!items[i].is_block && items[i].atom == key) return &items[i + 1];
        return nullptr;
    }
    const SpecNode& get(const std::string& key) const {
        const SpecNode* n = find(key);
        require(n != nullptr, "spec: missing key '" + key + "'");
        return *n;
    }
    double as_double() const {
        require(!is_block, "spec: expected a number");
        std::size_t pos = 0;
        double v = std::stod(atom, &pos);
        require(pos == atom.size(), "spec: bad number '" + atom + "'");
        return v;
    }
    long long as_int() const {
        require(!is_block, "spec: expected an integer");
        std::size_t pos = 0;
        long long v = std::stoll(atom, &pos);
        require(pos == atom.size(), "spec: bad integer '" + atom + "'");
        return v;
    }
    const std::string& as_string() const {
        require(!is_block, "spec: expected an atom");
        return atom;
    }
    double get_double(const std::string& key) const { return get(key).as_double(); }
    long long get_int(const std::string& key) const { return get(key).as_int(); }
    std::string get_string(const std::string& key) const { return get(key).as_string(); }
    std::optional<double> maybe_double(const std::string& key) const {
        const SpecNode* n = find(key);
        if (!n) return std::nullopt;
        return n->as_double();
    }
};

namespace detail {

inline std::vector<std::string> tokenize_spec(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '#') {
            flush();
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (c == '{' || c == '}') {
            flush();
            tokens.push_back(std::string(1, c));
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return tokens;
}

inline SpecNode parse_block(const std::vector<std::string>& tokens, std::size_t& pos, bool top) {
    SpecNode node;
    node.is_block = true;
    while (pos < tokens.size()) {
        const std::string& t = tokens[pos];
        if (t == "}") {
            require(!top, "spec: unmatched '}'");
            ++pos;
            return node;
        }
        if (t == "{") {
            ++pos;
            node.items.push_back(parse_block(tokens, pos, false));
        } else {
            SpecNode atom;
            atom.atom = t;
            node.items.push_back(std::move(atom));
            ++pos;
        }
    }
    require(top, "spec: missing '}'");
    return node;
}

}  // namespace detail

inline SpecNode parse_spec_text(const std::string& text) {
    auto tokens = detail::tokenize_spec(text);
    std::size_t pos = 0;
    return detail::parse_block(tokens, pos, true);
}

inline SpecNode parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), "cannot open spec file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec_text(ss.str());
}

// ============================================================================
// Problem construction from a spec block
// ============================================================================

inline ZooInstance instance_from_spec(const SpecNode& block) {
    const std::string kind = block.get_string("kind");
    ZooInstance z;
    if (kind == "sparse-parity") {
        const int n = int(block.get_int("n"));
        const int s = int(block.get_int("s"));
        std::vector<std::uint64_t> masks;
        const SpecNode* plist = block.find("parities");
        if (plist) {
            require(plist->is_block, "spec: parities must be a block of index blocks");
            for (const auto& p : plist->items) {
                require(p.is_block, "spec: each parity is a block of coordinate indices");
                std::uint64_t mask = 0;
                for (const auto& idx : p.items) mask |= 1ULL << idx.as_int();
                masks.push_back(mask);
            }
        } else {
            // default family: disjoint consecutive blocks of s coordinates
            const long long count = block.get_int("count");
            for (long long i = 0; i < count; ++i) {
                std::uint64_t mask = 0;
                for (int j = 0; j < s; ++j) mask |= 1ULL << (i * s + j);
                masks.push_back(mask);
            }
        }
        z = make_sparse_parity(n, s, masks);
        if (auto rho = block.maybe_double("noise-rho")) {
            z.problem = apply_noise(
                z.problem, MarkovOperatorSpec::t_rho(*rho, CoordinateMarginal{{-1, 1}, {0.5, 0.5}}));
            z.spectrum = parity_family_spectrum(double(masks.size()), s, std::pow(*rho, s));
            z.params["noise-rho"] = *rho;
        }
    } else if (kind == "tensor-pca") {
        const bool exact = !block.find("prior") || block.get_string("prior") == "exact";
        std::uint64_t seed = block.find("seed") ? std::uint64_t(block.get_int("seed")) : 0;
        z = make_tensor_pca(int(block.get_int("n")), int(block.get_int("r")),
                            block.get_double("lambda"), exact, seed);
    } else if (kind == "hpc") {
        z = make_multisample_hpc(int(block.get_int("N")), int(block.get_int("K")),
                                 int(block.get_int("s")), block.get_double("q"));
        if (auto rho = block.maybe_double("noise-rho")) {
            require(std::holds_alternative<ProductNull>(z.problem.null),
                    "noise-rho needs the tabulated backend");
            const auto& marginal = std::get<ProductNull>(z.problem.null).coord(0);
            z.problem = apply_noise(z.problem, MarkovOperatorSpec::t_rho(*rho, marginal));
            z.spectrum.reset();  // pair law no longer closed form
            z.params["noise-rho"] = *rho;
        }
    } else if (kind == "bipartite-pds") {
        z = make_bipartite_pds(int(block.get_int("N")), int(block.get_int("K")),
                               block.get_double("p"), block.get_double("q"));
    } else if (kind == "spiked-wishart") {
        z = make_spiked_wishart(int(block.get_int("n")), block.get_double("rho"),
                                block.get_double("lambda"),
                                block.find("seed") ? std::uint64_t(block.get_int("seed")) : 0);
    } else if (kind == "prs-ggm") {
        z = make_prs_ggm(int(block.get_int("n")), int(block.get_int("s")), int(block.get_int("d")),
                         block.get_double("kappa"),
                         block.find("seed") ? std::uint64_t(block.get_int("seed")) : 0);
    } else if (kind == "sda-counterexample") {
        auto ce = make_sda_counterexample(int(block.get_int("n")),
                                          block.find("seed") ? std::uint64_t(block.get_int("seed")) : 0);
        z = std::move(ce.instance);
    } else {
        throw std::invalid_argument("spec: unknown problem kind '" + kind + "'");
    }
    if (const SpecNode* id = block.find("id")) z.problem.id = z.id = id->as_string();
    validate_problem(z.problem);
    return z;
}

inline ZooInstance instance_from_spec_file(const std::string& path) {
    auto root = parse_spec_file(path);
    return instance_from_spec(root.get("problem"));
}

}  // namespace ldsq
