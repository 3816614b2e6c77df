#ifndef COARSEBOX_GROUP_HPP
#define COARSEBOX_GROUP_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "coarsebox/common.hpp"

namespace coarsebox {

enum class GroupKind { FreeWord, IntMatrix, ModMatrix, Lattice, Cyclic, Permutation };

inline const char* kind_name(GroupKind k) {
    switch (k) {
        case GroupKind::FreeWord: return "free-word";
        case GroupKind::IntMatrix: return "integer-matrix";
        case GroupKind::ModMatrix: return "modular-matrix";
        case GroupKind::Lattice: return "lattice";
        case GroupKind::Cyclic: return "cyclic";
        case GroupKind::Permutation: return "permutation";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Element payloads.  Every payload is kept in canonical form so that equality
// and hashing are exact: words are freely reduced, modular entries lie in
// [0, m), residues in [0, n).
// ---------------------------------------------------------------------------

struct WordElt {
    // Letters are +-(i+1) for generator i; never contains x followed by -x.
    std::vector<std::int32_t> letters;
    bool operator==(const WordElt&) const = default;
};

struct IntMatElt {
    int k = 0;
    std::vector<std::int64_t> a;  // row-major k x k
    bool operator==(const IntMatElt&) const = default;
};

struct ModMatElt {
    int k = 0;
    std::int64_t m = 0;
    std::vector<std::int64_t> a;  // entries in [0, m)
    bool operator==(const ModMatElt&) const = default;
};

struct LatticeElt {
    std::int64_t modulus = 0;  // 0: genuine lattice vector; m > 0: entries in [0, m)
    std::vector<std::int64_t> v;
    bool operator==(const LatticeElt&) const = default;
};

struct ResidueElt {
    std::int64_t n = 0;  // modulus
    std::int64_t v = 0;  // in [0, n)
    bool operator==(const ResidueElt&) const = default;
};

struct PermElt {
    std::vector<std::int32_t> img;  // i -> img[i]
    bool operator==(const PermElt&) const = default;
};

using GroupElement =
    std::variant<WordElt, IntMatElt, ModMatElt, LatticeElt, ResidueElt, PermElt>;

namespace detail {

inline std::int64_t mod_reduce(std::int64_t v, std::int64_t m) {
    std::int64_t r = v % m;
    return r < 0 ? r + m : r;
}

inline void word_push(std::vector<std::int32_t>& w, std::int32_t letter) {
    if (!w.empty() && w.back() == -letter)
        w.pop_back();
    else
        w.push_back(letter);
}

inline std::int64_t mat_det(int k, const std::vector<std::int64_t>& a) {
    require(k >= 1 && k <= 6, "matrix determinant supported for k in [1,6]");
    if (k == 1) return a[0];
    if (k == 2) return a[0] * a[3] - a[1] * a[2];
    std::int64_t det = 0;
    std::vector<std::int64_t> minor((k - 1) * (k - 1));
    for (int j = 0; j < k; ++j) {
        int mi = 0;
        for (int r = 1; r < k; ++r)
            for (int c = 0; c < k; ++c)
                if (c != j) minor[mi++] = a[r * k + c];
        std::int64_t sub = mat_det(k - 1, minor);
        det += (j % 2 == 0 ? 1 : -1) * a[j] * sub;
    }
    return det;
}

// Adjugate (transposed cofactor matrix): M * adj(M) = det(M) * I.
inline std::vector<std::int64_t> mat_adjugate(int k, const std::vector<std::int64_t>& a) {
    std::vector<std::int64_t> adj(k * k);
    if (k == 1) {
        adj[0] = 1;
        return adj;
    }
    std::vector<std::int64_t> minor((k - 1) * (k - 1));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            int mi = 0;
            for (int r = 0; r < k; ++r) {
                if (r == i) continue;
                for (int c = 0; c < k; ++c)
                    if (c != j) minor[mi++] = a[r * k + c];
            }
            std::int64_t cof = mat_det(k - 1, minor);
            if ((i + j) % 2 == 1) cof = -cof;
            adj[j * k + i] = cof;  // transpose
        }
    return adj;
}

inline std::int64_t egcd(std::int64_t a, std::int64_t b, std::int64_t& x, std::int64_t& y) {
    if (b == 0) {
        x = 1;
        y = 0;
        return a;
    }
    std::int64_t x1, y1;
    std::int64_t g = egcd(b, a % b, x1, y1);
    x = y1;
    y = x1 - (a / b) * y1;
    return g;
}

inline std::int64_t mod_inverse(std::int64_t v, std::int64_t m) {
    std::int64_t x, y;
    std::int64_t g = egcd(mod_reduce(v, m), m, x, y);
    require(g == 1 || g == -1, "value not invertible mod m");
    return mod_reduce(x * (g < 0 ? -1 : 1), m);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Element operations (payload-driven; mixed kinds are contract violations).
// ---------------------------------------------------------------------------

inline GroupElement ge_mul(const GroupElement& x, const GroupElement& y) {
    require(x.index() == y.index(), "group element kind mismatch in product");
    if (auto* a = std::get_if<WordElt>(&x)) {
        const auto& b = std::get<WordElt>(y);
        WordElt r = *a;
        for (auto l : b.letters) detail::word_push(r.letters, l);
        return r;
    }
    if (auto* a = std::get_if<IntMatElt>(&x)) {
        const auto& b = std::get<IntMatElt>(y);
        require(a->k == b.k, "matrix size mismatch");
        IntMatElt r{a->k, std::vector<std::int64_t>(a->k * a->k, 0)};
        for (int i = 0; i < a->k; ++i)
            for (int l = 0; l < a->k; ++l) {
                std::int64_t v = a->a[i * a->k + l];
                if (v == 0) continue;
                for (int j = 0; j < a->k; ++j) r.a[i * a->k + j] += v * b.a[l * a->k + j];
            }
        return r;
    }
    if (auto* a = std::get_if<ModMatElt>(&x)) {
        const auto& b = std::get<ModMatElt>(y);
        require(a->k == b.k && a->m == b.m, "modular matrix mismatch");
        ModMatElt r{a->k, a->m, std::vector<std::int64_t>(a->k * a->k, 0)};
        for (int i = 0; i < a->k; ++i)
            for (int l = 0; l < a->k; ++l) {
                std::int64_t v = a->a[i * a->k + l];
                if (v == 0) continue;
                for (int j = 0; j < a->k; ++j)
                    r.a[i * a->k + j] =
                        detail::mod_reduce(r.a[i * a->k + j] + v * b.a[l * a->k + j], a->m);
            }
        return r;
    }
    if (auto* a = std::get_if<LatticeElt>(&x)) {
        const auto& b = std::get<LatticeElt>(y);
        require(a->v.size() == b.v.size() && a->modulus == b.modulus, "lattice mismatch");
        LatticeElt r = *a;
        for (size_t i = 0; i < r.v.size(); ++i) {
            r.v[i] += b.v[i];
            if (r.modulus > 0) r.v[i] = detail::mod_reduce(r.v[i], r.modulus);
        }
        return r;
    }
    if (auto* a = std::get_if<ResidueElt>(&x)) {
        const auto& b = std::get<ResidueElt>(y);
        require(a->n == b.n, "residue modulus mismatch");
        return ResidueElt{a->n, detail::mod_reduce(a->v + b.v, a->n)};
    }
    const auto& a = std::get<PermElt>(x);
    const auto& b = std::get<PermElt>(y);
    require(a.img.size() == b.img.size(), "permutation degree mismatch");
    PermElt r{std::vector<std::int32_t>(a.img.size())};
    for (size_t i = 0; i < a.img.size(); ++i) r.img[i] = a.img[b.img[i]];
    return r;
}

inline GroupElement ge_inv(const GroupElement& x) {
    if (auto* a = std::get_if<WordElt>(&x)) {
        WordElt r;
        r.letters.reserve(a->letters.size());
        for (auto it = a->letters.rbegin(); it != a->letters.rend(); ++it)
            r.letters.push_back(-*it);
        return r;
    }
    if (auto* a = std::get_if<IntMatElt>(&x)) {
        std::int64_t det = detail::mat_det(a->k, a->a);
        require(det == 1 || det == -1, "integer matrix not invertible over Z");
        auto adj = detail::mat_adjugate(a->k, a->a);
        if (det == -1)
            for (auto& v : adj) v = -v;
        return IntMatElt{a->k, std::move(adj)};
    }
    if (auto* a = std::get_if<ModMatElt>(&x)) {
        std::int64_t det = detail::mod_reduce(detail::mat_det(a->k, a->a), a->m);
        std::int64_t dinv = detail::mod_inverse(det, a->m);
        auto adj = detail::mat_adjugate(a->k, a->a);
        for (auto& v : adj) v = detail::mod_reduce(v * dinv, a->m);
        return ModMatElt{a->k, a->m, std::move(adj)};
    }
    if (auto* a = std::get_if<LatticeElt>(&x)) {
        LatticeElt r = *a;
        for (auto& v : r.v) {
            v = -v;
            if (r.modulus > 0) v = detail::mod_reduce(v, r.modulus);
        }
        return r;
    }
    if (auto* a = std::get_if<ResidueElt>(&x)) return ResidueElt{a->n, detail::mod_reduce(-a->v, a->n)};
    const auto& a = std::get<PermElt>(x);
    PermElt r{std::vector<std::int32_t>(a.img.size())};
    for (size_t i = 0; i < a.img.size(); ++i) r.img[a.img[i]] = static_cast<std::int32_t>(i);
    return r;
}

inline bool ge_is_identity(const GroupElement& x) {
    if (auto* a = std::get_if<WordElt>(&x)) return a->letters.empty();
    if (auto* a = std::get_if<IntMatElt>(&x)) {
        for (int i = 0; i < a->k; ++i)
            for (int j = 0; j < a->k; ++j)
                if (a->a[i * a->k + j] != (i == j ? 1 : 0)) return false;
        return true;
    }
    if (auto* a = std::get_if<ModMatElt>(&x)) {
        for (int i = 0; i < a->k; ++i)
            for (int j = 0; j < a->k; ++j)
                if (a->a[i * a->k + j] != detail::mod_reduce(i == j ? 1 : 0, a->m)) return false;
        return true;
    }
    if (auto* a = std::get_if<LatticeElt>(&x)) {
        for (auto v : a->v)
            if (v != 0) return false;
        return true;
    }
    if (auto* a = std::get_if<ResidueElt>(&x)) return a->v == 0;
    const auto& a = std::get<PermElt>(x);
    for (size_t i = 0; i < a.img.size(); ++i)
        if (a.img[i] != static_cast<std::int32_t>(i)) return false;
    return true;
}

/// Compact byte key of the canonical form; equal elements get equal keys.
inline std::string ge_key(const GroupElement& x) {
    std::string s;
    auto push64 = [&s](std::int64_t v) {
        char buf[8];
        std::memcpy(buf, &v, 8);
        s.append(buf, 8);
    };
    s.push_back(static_cast<char>(x.index()));
    if (auto* a = std::get_if<WordElt>(&x)) {
        for (auto l : a->letters) push64(l);
    } else if (auto* a = std::get_if<IntMatElt>(&x)) {
        push64(a->k);
        for (auto v : a->a) push64(v);
    } else if (auto* a = std::get_if<ModMatElt>(&x)) {
        push64(a->k);
        push64(a->m);
        for (auto v : a->a) push64(v);
    } else if (auto* a = std::get_if<LatticeElt>(&x)) {
        push64(a->modulus);
        for (auto v : a->v) push64(v);
    } else if (auto* a = std::get_if<ResidueElt>(&x)) {
        push64(a->n);
        push64(a->v);
    } else {
        for (auto v : std::get<PermElt>(x).img) push64(v);
    }
    return s;
}

inline bool ge_eq(const GroupElement& x, const GroupElement& y) { return x == y; }

/// Reduce an element mod m: integer matrices to modular matrices, lattice
/// vectors and residues coordinate-wise.  The matrix reduction requires
/// determinant exactly 1, so the image lands in SL_k(Z/m).
inline GroupElement reduce_mod(const GroupElement& x, std::int64_t m) {
    require(m >= 1, "reduction modulus must be >= 1");
    if (auto* a = std::get_if<IntMatElt>(&x)) {
        require(detail::mat_det(a->k, a->a) == 1,
                "matrix determinant must be 1 to reduce mod m");
        ModMatElt r{a->k, m, std::vector<std::int64_t>(a->a.size())};
        for (size_t i = 0; i < a->a.size(); ++i) r.a[i] = detail::mod_reduce(a->a[i], m);
        return r;
    }
    if (auto* a = std::get_if<LatticeElt>(&x)) {
        if (a->v.size() == 1) return ResidueElt{m, detail::mod_reduce(a->v[0], m)};
        LatticeElt r{m, a->v};
        for (auto& v : r.v) v = detail::mod_reduce(v, m);
        return r;
    }
    if (auto* a = std::get_if<ResidueElt>(&x)) {
        require(a->n % m == 0, "residue reduction needs m dividing n");
        return ResidueElt{m, detail::mod_reduce(a->v, m)};
    }
    throw Error("reduce_mod: unsupported element kind");
}

// ---------------------------------------------------------------------------
// Finitely generated group.  For finite kinds an element listing can be
// attached (index 0 = identity); infinite kinds carry only the arithmetic.
// ---------------------------------------------------------------------------

class Group {
  public:
    Group() = default;
    Group(GroupKind kind, std::string name, GroupElement identity,
          std::vector<GroupElement> generators)
        : kind_(kind), name_(std::move(name)), identity_(std::move(identity)),
          generators_(std::move(generators)) {
        build_symmetric_generators();
    }

    GroupKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    const GroupElement& identity() const { return identity_; }
    const std::vector<GroupElement>& generators() const { return generators_; }
    /// Generators closed under inverses, duplicates removed, order-stable.
    const std::vector<GroupElement>& symmetric_generators() const { return sym_generators_; }

    GroupElement mul(const GroupElement& a, const GroupElement& b) const { return ge_mul(a, b); }
    GroupElement inv(const GroupElement& a) const { return ge_inv(a); }

    bool is_finite() const { return !elements_.empty(); }
    std::int64_t order() const {
        require(is_finite(), "order() needs an enumerated finite group");
        return static_cast<std::int64_t>(elements_.size());
    }
    const std::vector<GroupElement>& elements() const {
        require(is_finite(), "elements() needs an enumerated finite group");
        return elements_;
    }
    const GroupElement& element(std::int32_t i) const { return elements_.at(i); }

    std::int32_t index_of(const GroupElement& e) const {
        auto it = index_.find(ge_key(e));
        require(it != index_.end(), "element not in enumerated group");
        return it->second;
    }
    std::optional<std::int32_t> try_index_of(const GroupElement& e) const {
        auto it = index_.find(ge_key(e));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::int32_t mul_idx(std::int32_t a, std::int32_t b) const {
        return index_of(ge_mul(elements_.at(a), elements_.at(b)));
    }
    std::int32_t inv_idx(std::int32_t a) const { return index_of(ge_inv(elements_.at(a))); }

    /// table[g][x] = index of element(g) * element(x); rows are permutations.
    std::vector<std::vector<std::int32_t>> left_translation_table() const {
        require(is_finite(), "translation table needs a finite group");
        auto n = elements_.size();
        std::vector<std::vector<std::int32_t>> t(n, std::vector<std::int32_t>(n));
        for (size_t g = 0; g < n; ++g)
            for (size_t x = 0; x < n; ++x) t[g][x] = mul_idx(static_cast<std::int32_t>(g),
                                                             static_cast<std::int32_t>(x));
        return t;
    }

    /// Attach an explicit element listing.  elements[0] must be the identity.
    void set_elements(std::vector<GroupElement> elems) {
        require(!elems.empty() && ge_is_identity(elems[0]),
                "element listing must start with the identity");
        elements_ = std::move(elems);
        index_.clear();
        for (size_t i = 0; i < elements_.size(); ++i) {
            auto [it, fresh] = index_.emplace(ge_key(elements_[i]), static_cast<std::int32_t>(i));
            require(fresh, "duplicate element in listing");
        }
    }

    /// BFS closure of the symmetric generators from the identity.
    /// Deterministic: queue order, generators applied on the right in order.
    void enumerate(std::int64_t cap = limits::kMaxQuotientOrder) {
        std::vector<GroupElement> elems{identity_};
        std::unordered_map<std::string, std::int32_t> seen;
        seen.emplace(ge_key(identity_), 0);
        std::queue<std::int32_t> todo;
        todo.push(0);
        while (!todo.empty()) {
            std::int32_t cur = todo.front();
            todo.pop();
            for (const auto& s : sym_generators_) {
                GroupElement next = ge_mul(elems[cur], s);
                std::string key = ge_key(next);
                if (seen.contains(key)) continue;
                require(static_cast<std::int64_t>(elems.size()) < cap,
                        "quotient enumeration exceeded order cap");
                seen.emplace(std::move(key), static_cast<std::int32_t>(elems.size()));
                elems.push_back(std::move(next));
                todo.push(static_cast<std::int32_t>(elems.size() - 1));
            }
        }
        elements_ = std::move(elems);
        index_ = std::move(seen);
    }

  private:
    void build_symmetric_generators() {
        sym_generators_.clear();
        std::set<std::string> keys;
        auto add = [&](const GroupElement& g) {
            auto key = ge_key(g);
            if (keys.insert(key).second) sym_generators_.push_back(g);
        };
        for (const auto& g : generators_) add(g);
        for (const auto& g : generators_) add(ge_inv(g));
    }

    GroupKind kind_ = GroupKind::Cyclic;
    std::string name_;
    GroupElement identity_;
    std::vector<GroupElement> generators_;
    std::vector<GroupElement> sym_generators_;
    std::vector<GroupElement> elements_;
    std::unordered_map<std::string, std::int32_t> index_;
};

// ---------------------------------------------------------------------------
// Stock constructions.
// ---------------------------------------------------------------------------

inline Group cyclic_group(std::int64_t n) {
    require(n >= 1, "cyclic group needs n >= 1");
    Group g(GroupKind::Cyclic, "Z/" + std::to_string(n), ResidueElt{n, 0},
            {ResidueElt{n, detail::mod_reduce(1, n)}});
    std::vector<GroupElement> elems;
    elems.reserve(n);
    for (std::int64_t v = 0; v < n; ++v) elems.push_back(ResidueElt{n, v});
    g.set_elements(std::move(elems));
    return g;
}

inline Group trivial_group() { return cyclic_group(1); }

inline Group lattice_group(int rank) {
    require(rank >= 1, "lattice group needs rank >= 1");
    std::vector<GroupElement> gens;
    for (int i = 0; i < rank; ++i) {
        LatticeElt e{0, std::vector<std::int64_t>(rank, 0)};
        e.v[i] = 1;
        gens.push_back(std::move(e));
    }
    return Group(GroupKind::Lattice, rank == 1 ? "Z" : "Z^" + std::to_string(rank),
                 LatticeElt{0, std::vector<std::int64_t>(rank, 0)}, std::move(gens));
}

inline Group free_group(int rank) {
    require(rank >= 1, "free group needs rank >= 1");
    std::vector<GroupElement> gens;
    for (int i = 0; i < rank; ++i) gens.push_back(WordElt{{i + 1}});
    return Group(GroupKind::FreeWord, "F" + std::to_string(rank), WordElt{}, std::move(gens));
}

inline Group permutation_group(std::string name, int degree,
                               std::vector<std::vector<std::int32_t>> gen_images) {
    std::vector<GroupElement> gens;
    for (auto& img : gen_images) {
        require(static_cast<int>(img.size()) == degree, "permutation degree mismatch");
        gens.push_back(PermElt{std::move(img)});
    }
    PermElt id{std::vector<std::int32_t>(degree)};
    for (int i = 0; i < degree; ++i) id.img[i] = i;
    Group g(GroupKind::Permutation, std::move(name), id, std::move(gens));
    g.enumerate();
    return g;
}

inline Group symmetric_group(int n) {
    require(n >= 2 && n <= 6, "symmetric_group supported for n in [2,6]");
    std::vector<std::int32_t> transp(n), cyc(n);
    for (int i = 0; i < n; ++i) transp[i] = i, cyc[i] = (i + 1) % n;
    std::swap(transp[0], transp[1]);
    return permutation_group("S" + std::to_string(n), n, {transp, cyc});
}

inline Group alternating_group_4() {
    return permutation_group("A4", 4, {{1, 2, 0, 3}, {0, 2, 3, 1}});
}

/// Symmetries of the square (order 8): rotation + reflection on 4 vertices.
inline Group dihedral_square() {
    return permutation_group("D4", 4, {{1, 2, 3, 0}, {1, 0, 3, 2}});
}

inline IntMatElt int_mat2(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    return IntMatElt{2, {a, b, c, d}};
}

/// The two upper/lower triangular generators with off-diagonal entry 2.
inline std::pair<IntMatElt, IntMatElt> sl2_standard_generators() {
    return {int_mat2(1, 2, 0, 1), int_mat2(1, 0, 2, 1)};
}

inline Group sl2z_group() {
    auto [A, B] = sl2_standard_generators();
    return Group(GroupKind::IntMatrix, "SL2(Z)<A,B>", int_mat2(1, 0, 0, 1), {A, B});
}

/// SL2 over Z/m, enumerated from the two standard generators reduced mod m.
inline Group sl2_mod_group(std::int64_t m, std::int64_t cap = limits::kMaxQuotientOrder) {
    auto [A, B] = sl2_standard_generators();
    Group g(GroupKind::ModMatrix, "SL2(Z/" + std::to_string(m) + ")",
            reduce_mod(IntMatElt{2, {1, 0, 0, 1}}, m), {reduce_mod(A, m), reduce_mod(B, m)});
    g.enumerate(cap);
    return g;
}

// ---------------------------------------------------------------------------
// Quotient towers: a base group together with a list of stages, each stage
// given by a modulus and the images of the base generators.
// ---------------------------------------------------------------------------

struct TowerStage {
    std::string label;
    std::int64_t modulus = 0;
    std::vector<GroupElement> generator_images;  // parallel to base generators
};

class QuotientTower {
  public:
    QuotientTower(Group base, std::vector<TowerStage> stages, bool declared_nested = false)
        : base_(std::move(base)), stages_(std::move(stages)), nested_(declared_nested) {
        for (const auto& st : stages_)
            require(st.generator_images.size() == base_.generators().size(),
                    "stage needs one image per base generator");
    }

    const Group& base() const { return base_; }
    int stage_count() const { return static_cast<int>(stages_.size()); }
    const TowerStage& stage(int i) const { return stages_.at(i); }
    bool declared_nested() const { return nested_; }

    /// All generator images equal to the identity: the stage collapses.
    bool stage_degenerate(int i) const {
        for (const auto& img : stages_.at(i).generator_images)
            if (!ge_is_identity(img)) return false;
        return true;
    }

    /// The quotient homomorphism on elements.  Free words are evaluated at
    /// the generator images; matrix/lattice/residue elements reduce mod m.
    GroupElement map_to_stage(const GroupElement& e, int i) const {
        const auto& st = stages_.at(i);
        if (base_.kind() == GroupKind::FreeWord) {
            const auto& w = std::get<WordElt>(e);
            GroupElement acc = identity_image(i);
            for (auto letter : w.letters) {
                int gi = std::abs(letter) - 1;
                const auto& img = st.generator_images.at(gi);
                acc = ge_mul(acc, letter > 0 ? img : ge_inv(img));
            }
            return acc;
        }
        return reduce_mod(e, st.modulus);
    }

    /// BFS closure of the stage's generator images; deterministic order.
    Group enumerate_quotient(int i, std::int64_t cap = limits::kMaxQuotientOrder) const {
        const auto& st = stages_.at(i);
        GroupKind qk = std::holds_alternative<ResidueElt>(identity_image(i))
                           ? GroupKind::Cyclic
                           : (std::holds_alternative<ModMatElt>(identity_image(i))
                                  ? GroupKind::ModMatrix
                                  : GroupKind::Lattice);
        Group q(qk, base_.name() + " / " + st.label, identity_image(i), st.generator_images);
        q.enumerate(cap);
        return q;
    }

    /// Homomorphism property on generator pairs (and inverses), per stage.
    bool check_homomorphism_on_generators(int i) const {
        std::vector<GroupElement> probes = base_.symmetric_generators();
        for (const auto& x : probes)
            for (const auto& y : probes) {
                GroupElement lhs = map_to_stage(base_.mul(x, y), i);
                GroupElement rhs = ge_mul(map_to_stage(x, i), map_to_stage(y, i));
                if (!ge_eq(lhs, rhs)) return false;
            }
        return true;
    }

    /// For declared-nested towers: consecutive moduli divide and generator
    /// images are compatible with the extra reduction.
    bool check_nested() const {
        for (int i = 0; i + 1 < stage_count(); ++i) {
            const auto& a = stages_[i];
            const auto& b = stages_[i + 1];
            if (a.modulus == 0 || b.modulus == 0) return false;
            if (b.modulus % a.modulus != 0) return false;
            for (size_t j = 0; j < a.generator_images.size(); ++j) {
                GroupElement dropped = reduce_mod(b.generator_images[j], a.modulus);
                if (!ge_eq(dropped, a.generator_images[j])) return false;
            }
        }
        return true;
    }

  private:
    GroupElement identity_image(int i) const {
        const auto& st = stages_.at(i);
        GroupElement e = st.generator_images.at(0);
        return ge_mul(e, ge_inv(e));
    }

    Group base_;
    std::vector<TowerStage> stages_;
    bool nested_ = false;
};

/// Z with stages Z -> Z/n for the given moduli.
inline QuotientTower integer_line_tower(const std::vector<std::int64_t>& moduli) {
    std::vector<TowerStage> stages;
    for (auto n : moduli) {
        require(n >= 1, "tower modulus must be >= 1");
        stages.push_back(TowerStage{"n=" + std::to_string(n), n,
                                    {ResidueElt{n, detail::mod_reduce(1, n)}}});
    }
    bool nested = true;
    for (size_t i = 0; i + 1 < moduli.size(); ++i)
        if (moduli[i + 1] % moduli[i] != 0) nested = false;
    return QuotientTower(lattice_group(1), std::move(stages), nested);
}

/// The two standard matrices as a free-word base (the group they generate in
/// SL2(Z) is free, so word arithmetic is exact), with stages reducing mod p.
inline QuotientTower sl2_word_tower(const std::vector<std::int64_t>& moduli) {
    auto [A, B] = sl2_standard_generators();
    std::vector<TowerStage> stages;
    for (auto p : moduli)
        stages.push_back(TowerStage{"p=" + std::to_string(p), p,
                                    {reduce_mod(A, p), reduce_mod(B, p)}});
    return QuotientTower(free_group(2), std::move(stages));
}

/// Same tower with integer-matrix arithmetic in the base (cross-check form).
inline QuotientTower sl2_matrix_tower(const std::vector<std::int64_t>& moduli) {
    auto [A, B] = sl2_standard_generators();
    std::vector<TowerStage> stages;
    for (auto p : moduli)
        stages.push_back(TowerStage{"p=" + std::to_string(p), p,
                                    {reduce_mod(A, p), reduce_mod(B, p)}});
    return QuotientTower(sl2z_group(), std::move(stages));
}

// ---------------------------------------------------------------------------
// Subgroup and coset utilities for small enumerated groups.
// ---------------------------------------------------------------------------

/// Closure of a set of element indices as a subgroup (sorted indices).
inline std::vector<std::int32_t> subgroup_closure(const Group& g,
                                                  std::vector<std::int32_t> seed) {
    std::set<std::int32_t> have{0};
    for (auto i : seed) have.insert(i);
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<std::int32_t> cur(have.begin(), have.end());
        for (auto a : cur) {
            if (have.insert(g.inv_idx(a)).second) grew = true;
            for (auto b : cur)
                if (have.insert(g.mul_idx(a, b)).second) grew = true;
        }
    }
    return {have.begin(), have.end()};
}

/// Every subgroup of a small enumerated group, sorted lexicographically.
inline std::vector<std::vector<std::int32_t>> all_subgroups(const Group& g) {
    std::set<std::vector<std::int32_t>> found;
    found.insert({0});
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<std::vector<std::int32_t>> cur(found.begin(), found.end());
        for (const auto& h : cur) {
            for (std::int32_t x = 0; x < g.order(); ++x) {
                if (std::binary_search(h.begin(), h.end(), x)) continue;
                auto seed = h;
                seed.push_back(x);
                if (found.insert(subgroup_closure(g, std::move(seed))).second) grew = true;
            }
        }
    }
    return {found.begin(), found.end()};
}

inline bool is_normal_subgroup(const Group& g, const std::vector<std::int32_t>& h) {
    for (std::int32_t x = 0; x < g.order(); ++x) {
        std::int32_t xi = g.inv_idx(x);
        for (auto e : h) {
            std::int32_t conj = g.mul_idx(g.mul_idx(x, e), xi);
            if (!std::binary_search(h.begin(), h.end(), conj)) return false;
        }
    }
    return true;
}

/// {h * k : h in H, k in K} as sorted indices (a subgroup when one is normal).
inline std::vector<std::int32_t> product_set(const Group& g,
                                             const std::vector<std::int32_t>& h,
                                             const std::vector<std::int32_t>& k) {
    std::set<std::int32_t> out;
    for (auto a : h)
        for (auto b : k) out.insert(g.mul_idx(a, b));
    return {out.begin(), out.end()};
}

/// A subgroup as a standalone enumerated group.  Element i of the result is
/// g.element(members[i]); members must be the sorted index set of a subgroup,
/// so members[0] == 0 and the result's index 0 is the identity.
inline Group subgroup_group(const Group& g, const std::vector<std::int32_t>& members) {
    require(g.is_finite(), "subgroup_group needs an enumerated finite group");
    require(!members.empty() && members.front() == 0,
            "subgroup members must be sorted indices starting at the identity");
    for (auto a : members) {
        require(a >= 0 && a < g.order(), "subgroup member out of range");
        require(std::binary_search(members.begin(), members.end(), g.inv_idx(a)),
                "subgroup members are not closed under inverses");
        for (auto b : members)
            require(std::binary_search(members.begin(), members.end(), g.mul_idx(a, b)),
                    "subgroup members are not closed under multiplication");
    }
    std::vector<GroupElement> elems;
    elems.reserve(members.size());
    for (auto m : members) elems.push_back(g.element(m));
    std::string name = g.name() + " sub(" + std::to_string(members.size()) + ")/{";
    for (std::size_t i = 0; i < members.size(); ++i)
        name += (i ? "," : "") + std::to_string(members[i]);
    name += "}";
    Group h(g.kind(), std::move(name), g.identity(),
            std::vector<GroupElement>(elems.begin() + 1, elems.end()));
    h.set_elements(std::move(elems));
    return h;
}

/// Left cosets gH: per-element coset id, ids ordered by minimal member.
struct CosetSpace {
    std::vector<std::int32_t> coset_of;  // element index -> coset id
    std::vector<std::int32_t> rep;       // coset id -> minimal element index
    int count = 0;
};

inline CosetSpace left_cosets(const Group& g, const std::vector<std::int32_t>& h) {
    std::int64_t n = g.order();
    CosetSpace cs;
    cs.coset_of.assign(n, -1);
    for (std::int32_t x = 0; x < n; ++x) {
        if (cs.coset_of[x] != -1) continue;
        std::int32_t id = cs.count++;
        cs.rep.push_back(x);
        for (auto e : h) cs.coset_of[g.mul_idx(x, e)] = id;
    }
    return cs;
}

}  // namespace coarsebox

#endif
