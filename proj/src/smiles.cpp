#include "molaff/smiles.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <set>

#include "molaff/error.hpp"

namespace molaff::smiles {

namespace {

// Element symbols accepted inside brackets.
const std::set<std::string, std::less<>> kElements{
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si", "P",  "S",  "Cl",
    "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se",
    "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb",
    "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er",
    "Tm", "Yb", "Lu", "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At",
    "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U"};

std::vector<int> standard_valences(std::string_view element) {
  if (element == "B") return {3};
  if (element == "C") return {4};
  if (element == "N") return {3};
  if (element == "O") return {2};
  if (element == "P") return {3, 5};
  if (element == "S") return {2, 4, 6};
  if (element == "F" || element == "Cl" || element == "Br" || element == "I") return {1};
  return {};
}

int bond_valence(BondOrder order) {
  switch (order) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& options) : text_(text), options_(options) {}

  MolGraph run() {
    if (text_.empty()) throw Error(ErrorKind::MalformedSmiles, "empty SMILES");
    while (pos_ < text_.size()) step();
    if (!branches_.empty()) fail(ErrorKind::UnbalancedParenthesis, "unclosed '('");
    if (!rings_.empty()) fail(ErrorKind::UnmatchedRingClosure, "ring bond " + std::to_string(rings_.begin()->first) + " never closed");
    if (pending_) fail(ErrorKind::MalformedSmiles, "dangling bond at end of input");
    assign_implicit_hydrogens();
    return std::move(mol_);
  }

 private:
  struct RingOpening {
    int atom;
    std::optional<BondOrder> order;
  };

  [[noreturn]] void fail(ErrorKind kind, const std::string& what) const {
    throw Error(kind, "'" + std::string(text_) + "' at position " + std::to_string(pos_) + ": " + what);
  }

  char peek(std::size_t offset = 0) const { return pos_ + offset < text_.size() ? text_[pos_ + offset] : '\0'; }

  void step() {
    const char c = text_[pos_];
    switch (c) {
      case '(':
        if (prev_ < 0) fail(ErrorKind::MalformedSmiles, "branch without a preceding atom");
        if (pending_) fail(ErrorKind::MalformedSmiles, "bond symbol before '('");
        branches_.push_back(prev_);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) fail(ErrorKind::UnbalancedParenthesis, "unmatched ')'");
        if (pending_) fail(ErrorKind::MalformedSmiles, "dangling bond before ')'");
        prev_ = branches_.back();
        branches_.pop_back();
        ++pos_;
        return;
      case '.':
        if (pending_) fail(ErrorKind::MalformedSmiles, "bond symbol before '.'");
        prev_ = -1;
        ++pos_;
        return;
      case '-': set_bond(BondOrder::Single); return;
      case '/': set_bond(BondOrder::Single); return;
      case '\\': set_bond(BondOrder::Single); return;
      case '=': set_bond(BondOrder::Double); return;
      case '#': set_bond(BondOrder::Triple); return;
      case ':': set_bond(BondOrder::Aromatic); return;
      case '[': bracket_atom(); return;
      case '%': {
        if (!std::isdigit(static_cast<unsigned char>(peek(1))) || !std::isdigit(static_cast<unsigned char>(peek(2)))) {
          fail(ErrorKind::MalformedSmiles, "'%' must be followed by two digits");
        }
        const int number = (peek(1) - '0') * 10 + (peek(2) - '0');
        ring_bond(number);
        pos_ += 3;
        return;
      }
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_bond(c - '0');
      ++pos_;
      return;
    }
    organic_atom();
  }

  void set_bond(BondOrder order) {
    if (pending_) fail(ErrorKind::MalformedSmiles, "two consecutive bond symbols");
    if (prev_ < 0) fail(ErrorKind::MalformedSmiles, "bond symbol without a preceding atom");
    pending_ = order;
    ++pos_;
  }

  BondOrder default_order(int a, int b) const {
    return mol_.atoms[static_cast<std::size_t>(a)].aromatic && mol_.atoms[static_cast<std::size_t>(b)].aromatic
               ? BondOrder::Aromatic
               : BondOrder::Single;
  }

  void add_bond(int a, int b, std::optional<BondOrder> order) {
    if (a == b) fail(ErrorKind::MalformedSmiles, "atom bonded to itself");
    for (const auto& bond : mol_.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
        fail(ErrorKind::MalformedSmiles, "duplicate bond between atoms " + std::to_string(a) + " and " + std::to_string(b));
      }
    }
    mol_.bonds.push_back({a, b, order.value_or(default_order(a, b))});
  }

  void ring_bond(int number) {
    if (prev_ < 0) fail(ErrorKind::MalformedSmiles, "ring bond without a preceding atom");
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_.emplace(number, RingOpening{prev_, pending_});
    } else {
      const RingOpening open = it->second;
      rings_.erase(it);
      if (open.order && pending_ && *open.order != *pending_) {
        fail(ErrorKind::MalformedSmiles, "conflicting bond orders on ring bond " + std::to_string(number));
      }
      add_bond(open.atom, prev_, pending_ ? pending_ : open.order);
    }
    pending_.reset();
  }

  void attach(Atom atom) {
    mol_.atoms.push_back(std::move(atom));
    const int index = static_cast<int>(mol_.atoms.size()) - 1;
    if (prev_ >= 0) add_bond(prev_, index, pending_);
    pending_.reset();
    prev_ = index;
  }

  void organic_atom() {
    const char c = text_[pos_];
    Atom atom;
    std::size_t width = 1;
    switch (c) {
      case 'B':
        if (peek(1) == 'r') {
          atom.element = "Br";
          width = 2;
        } else {
          atom.element = "B";
        }
        break;
      case 'C':
        if (peek(1) == 'l') {
          atom.element = "Cl";
          width = 2;
        } else {
          atom.element = "C";
        }
        break;
      case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
        atom.element = std::string(1, c);
        break;
      case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
        atom.element = std::string(1, static_cast<char>(c - 'a' + 'A'));
        atom.aromatic = true;
        break;
      default:
        fail(ErrorKind::UnknownSymbol, std::string("unsupported symbol '") + c + "'");
    }
    pos_ += width;
    attach(std::move(atom));
  }

  int read_int(int fallback) {
    if (!std::isdigit(static_cast<unsigned char>(peek()))) return fallback;
    int value = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) value = value * 10 + (text_[pos_++] - '0');
    return value;
  }

  void bracket_atom() {
    const std::size_t close = text_.find(']', pos_);
    if (close == std::string_view::npos) fail(ErrorKind::MalformedSmiles, "unterminated bracket atom");
    ++pos_;  // '['
    read_int(0);  // isotope, ignored

    Atom atom;
    atom.bracket = true;
    const char first = peek();
    if (std::islower(static_cast<unsigned char>(first))) {
      // Aromatic: se, as, or a single letter.
      const std::string two{first, peek(1)};
      if (two == "se" || two == "as") {
        atom.element = two == "se" ? "Se" : "As";
        pos_ += 2;
      } else if (std::string_view("bcnops").find(first) != std::string_view::npos) {
        atom.element = std::string(1, static_cast<char>(first - 'a' + 'A'));
        ++pos_;
      } else {
        fail(ErrorKind::UnknownSymbol, std::string("unsupported aromatic symbol '") + first + "'");
      }
      atom.aromatic = true;
    } else if (std::isupper(static_cast<unsigned char>(first))) {
      std::string sym(1, first);
      if (std::islower(static_cast<unsigned char>(peek(1))) && kElements.contains(sym + peek(1))) {
        sym.push_back(peek(1));
      }
      if (!kElements.contains(sym)) fail(ErrorKind::UnknownSymbol, "unknown element '" + sym + "'");
      atom.element = sym;
      pos_ += sym.size();
    } else {
      fail(ErrorKind::UnknownSymbol, std::string("unsupported bracket atom symbol '") + first + "'");
    }

    // Chirality is accepted and ignored.
    while (peek() == '@') ++pos_;
    if (peek() == 'T' || peek() == 'A' || peek() == 'S' || peek() == 'O') {
      while (std::isalpha(static_cast<unsigned char>(peek())) && peek() != 'H') ++pos_;
      read_int(0);
    }
    if (peek() == 'H') {
      ++pos_;
      atom.hydrogens = read_int(1);
    }
    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      int magnitude = 0;
      while (peek() == sign) {
        ++magnitude;
        ++pos_;
      }
      if (magnitude == 1) magnitude = read_int(1);
      atom.charge = sign == '+' ? magnitude : -magnitude;
    }
    if (peek() == ':') {
      ++pos_;
      read_int(0);  // atom class
    }
    if (pos_ != close) fail(ErrorKind::MalformedSmiles, "unexpected characters in bracket atom");
    ++pos_;
    attach(std::move(atom));
  }

  void assign_implicit_hydrogens() {
    std::vector<int> valence_sum(mol_.atoms.size(), 0);
    std::vector<bool> has_aromatic_bond(mol_.atoms.size(), false);
    for (const auto& bond : mol_.bonds) {
      for (int end : {bond.a, bond.b}) {
        valence_sum[static_cast<std::size_t>(end)] += bond_valence(bond.order);
        if (bond.order == BondOrder::Aromatic) has_aromatic_bond[static_cast<std::size_t>(end)] = true;
      }
    }
    for (std::size_t i = 0; i < mol_.atoms.size(); ++i) {
      Atom& atom = mol_.atoms[i];
      if (atom.bracket) continue;
      const auto allowed = standard_valences(atom.element);
      const int used = valence_sum[i];
      auto target = std::find_if(allowed.begin(), allowed.end(), [&](int v) { return v >= used; });
      if (target == allowed.end()) {
        const std::string msg = "atom " + std::to_string(i) + " (" + atom.element + ") has bond order sum " +
                                std::to_string(used) + " above its standard valence";
        if (options_.strict_valence) throw Error(ErrorKind::MalformedSmiles, msg);
        mol_.warnings.push_back(msg);
        atom.hydrogens = 0;
        continue;
      }
      // An aromatic atom spends one valence unit on the delocalised system.
      const int pi = atom.aromatic && has_aromatic_bond[i] ? 1 : 0;
      atom.hydrogens = std::max(0, *target - used - pi);
    }
  }

  std::string_view text_;
  ParseOptions options_;
  std::size_t pos_ = 0;
  MolGraph mol_;
  int prev_ = -1;
  std::optional<BondOrder> pending_;
  std::vector<int> branches_;
  std::map<int, RingOpening> rings_;
};

struct Neighbor {
  int atom;
  BondOrder order;
};

class Perception {
 public:
  explicit Perception(const MolGraph& mol) : mol_(mol), adj_(mol.atoms.size()) {
    for (const auto& bond : mol.bonds) {
      adj_[static_cast<std::size_t>(bond.a)].push_back({bond.b, bond.order});
      adj_[static_cast<std::size_t>(bond.b)].push_back({bond.a, bond.order});
    }
  }

  const Atom& atom(int i) const { return mol_.atoms[static_cast<std::size_t>(i)]; }
  const std::vector<Neighbor>& neighbors(int i) const { return adj_[static_cast<std::size_t>(i)]; }
  bool is(int i, std::string_view element) const { return atom(i).element == element; }

  int total_h(int i) const {
    int h = atom(i).hydrogens;
    for (const auto& n : neighbors(i)) h += is(n.atom, "H") ? 1 : 0;
    return h;
  }

  std::vector<Neighbor> heavy_neighbors(int i) const {
    std::vector<Neighbor> out;
    for (const auto& n : neighbors(i)) {
      if (!is(n.atom, "H")) out.push_back(n);
    }
    return out;
  }

  int count_double_o(int i) const {
    int k = 0;
    for (const auto& n : neighbors(i)) k += (n.order == BondOrder::Double && is(n.atom, "O")) ? 1 : 0;
    return k;
  }

  bool is_carbonyl_carbon(int i) const { return is(i, "C") && count_double_o(i) > 0; }

  // Terminal O bearing H or a negative charge (acid or its conjugate base).
  bool is_acid_oxygen(int o) const {
    if (!is(o, "O") || heavy_neighbors(o).size() != 1) return false;
    return total_h(o) >= 1 || atom(o).charge < 0;
  }

  bool has_single_bonded(int i, const std::function<bool(int)>& pred) const {
    for (const auto& n : neighbors(i)) {
      if (n.order == BondOrder::Single && pred(n.atom)) return true;
    }
    return false;
  }

  std::size_t size() const { return mol_.atoms.size(); }

 private:
  const MolGraph& mol_;
  std::vector<std::vector<Neighbor>> adj_;
};

}  // namespace

std::vector<std::vector<int>> MolGraph::neighbors() const {
  std::vector<std::vector<int>> adj(atoms.size());
  for (const auto& bond : bonds) {
    adj[static_cast<std::size_t>(bond.a)].push_back(bond.b);
    adj[static_cast<std::size_t>(bond.b)].push_back(bond.a);
  }
  return adj;
}

MolGraph parse_smiles(std::string_view smiles, const ParseOptions& options) {
  return Parser(smiles, options).run();
}

std::string_view to_string(Group group) {
  switch (group) {
    case Group::CarboxylicAcid: return "carboxylic_acid";
    case Group::SulfonicAcid: return "sulfonic_acid";
    case Group::Sulfonamide: return "sulfonamide";
    case Group::Hydroxyl: return "hydroxyl";
    case Group::Ether: return "ether";
    case Group::Amine: return "amine";
    case Group::Ester: return "ester";
    case Group::Ketone: return "ketone";
    case Group::Phosphate: return "phosphate";
    case Group::HalideOther: return "halide_other";
  }
  return "";
}

std::size_t GroupSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<Group> GroupSet::to_vector() const {
  std::vector<Group> out;
  for (Group g : kAllGroups) {
    if (contains(g)) out.push_back(g);
  }
  return out;
}

namespace {

using Mask = std::uint64_t;

class PathSearch {
 public:
  PathSearch(const std::vector<std::vector<int>>& adj, const std::vector<int>& members)
      : n_(members.size()), adj_(members.size()) {
    std::vector<int> local(adj.size(), -1);
    for (std::size_t i = 0; i < members.size(); ++i) local[static_cast<std::size_t>(members[i])] = static_cast<int>(i);
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (int v : adj[static_cast<std::size_t>(members[i])]) {
        adj_[i] |= Mask{1} << local[static_cast<std::size_t>(v)];
      }
    }
  }

  int run() {
    for (std::size_t s = 0; s < n_ && best_ < static_cast<int>(n_); ++s) {
      dfs(static_cast<int>(s), Mask{1} << s, 1);
    }
    return best_;
  }

 private:
  // Vertices reachable from v without touching `visited`.
  int reachable(int v, Mask visited) const {
    Mask seen = 0;
    Mask frontier = adj_[static_cast<std::size_t>(v)] & ~visited;
    while (frontier) {
      seen |= frontier;
      Mask next = 0;
      for (Mask f = frontier; f; f &= f - 1) next |= adj_[static_cast<std::size_t>(std::countr_zero(f))];
      frontier = next & ~visited & ~seen;
    }
    return std::popcount(seen);
  }

  void dfs(int v, Mask visited, int length) {
    best_ = std::max(best_, length);
    if (length + reachable(v, visited) <= best_) return;
    for (Mask next = adj_[static_cast<std::size_t>(v)] & ~visited; next; next &= next - 1) {
      const int u = std::countr_zero(next);
      dfs(u, visited | (Mask{1} << u), length + 1);
      if (best_ == static_cast<int>(n_)) return;
    }
  }

  std::size_t n_;
  std::vector<Mask> adj_;
  int best_ = 0;
};

}  // namespace

int longest_simple_path(const std::vector<std::vector<int>>& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<int> component(n, -1);
  int best = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (component[start] >= 0) continue;
    std::vector<int> members{static_cast<int>(start)};
    component[start] = static_cast<int>(start);
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (int u : adjacency[static_cast<std::size_t>(members[k])]) {
        if (component[static_cast<std::size_t>(u)] < 0) {
          component[static_cast<std::size_t>(u)] = static_cast<int>(start);
          members.push_back(u);
        }
      }
    }
    if (members.size() > kMaxChainSubgraph) {
      throw Error(ErrorKind::SubgraphTooLarge, "fluorinated-carbon component of " + std::to_string(members.size()) +
                                                   " atoms exceeds the exact-search limit of " +
                                                   std::to_string(kMaxChainSubgraph));
    }
    std::sort(members.begin(), members.end());
    best = std::max(best, PathSearch(adjacency, members).run());
  }
  return best;
}

StructuralStats fluorocarbon_stats(const MolGraph& mol) {
  const Perception p(mol);
  std::vector<int> local(mol.atoms.size(), -1);
  std::vector<int> fluorinated;
  for (std::size_t i = 0; i < mol.atoms.size(); ++i) {
    const int a = static_cast<int>(i);
    if (!p.is(a, "C")) continue;
    const bool has_f = std::any_of(p.neighbors(a).begin(), p.neighbors(a).end(),
                                   [&](const Neighbor& n) { return p.is(n.atom, "F"); });
    if (has_f) {
      local[i] = static_cast<int>(fluorinated.size());
      fluorinated.push_back(a);
    }
  }
  std::vector<std::vector<int>> sub(fluorinated.size());
  for (std::size_t k = 0; k < fluorinated.size(); ++k) {
    for (const auto& n : p.neighbors(fluorinated[k])) {
      const int j = local[static_cast<std::size_t>(n.atom)];
      if (j >= 0) sub[k].push_back(j);
    }
  }
  StructuralStats stats;
  stats.n_fluorinated_carbons = static_cast<int>(fluorinated.size());
  stats.longest_cf_chain = longest_simple_path(sub);
  return stats;
}

GroupSet detect_functional_groups(const MolGraph& mol) {
  const Perception p(mol);
  GroupSet groups;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int a = static_cast<int>(i);
    const Atom& atom = p.atom(a);

    if (atom.element == "Cl" || atom.element == "Br" || atom.element == "I") groups.insert(Group::HalideOther);

    if (atom.element == "C" && !atom.aromatic && p.count_double_o(a) > 0) {
      // Carboxylic acid: C(=O)-O[H or -]
      if (p.has_single_bonded(a, [&](int o) { return p.is_acid_oxygen(o); })) groups.insert(Group::CarboxylicAcid);
      // Ester: C(=O)-O-C
      if (p.has_single_bonded(a, [&](int o) {
            if (!p.is(o, "O")) return false;
            const auto heavy = p.heavy_neighbors(o);
            return heavy.size() == 2 && std::all_of(heavy.begin(), heavy.end(), [&](const Neighbor& n) {
                     return n.order == BondOrder::Single && p.is(n.atom, "C");
                   });
          })) {
        groups.insert(Group::Ester);
      }
      // Ketone: C(=O) flanked by exactly two carbons.
      const auto heavy = p.heavy_neighbors(a);
      const auto carbons = std::count_if(heavy.begin(), heavy.end(), [&](const Neighbor& n) {
        return n.order == BondOrder::Single && p.is(n.atom, "C");
      });
      if (heavy.size() == 3 && carbons == 2) groups.insert(Group::Ketone);
    }

    if (atom.element == "S" && p.count_double_o(a) >= 2) {
      // Sulfonic acid: S(=O)(=O)-O[H or -]; sulfonamide: S(=O)(=O)-N
      if (p.has_single_bonded(a, [&](int o) { return p.is_acid_oxygen(o); })) groups.insert(Group::SulfonicAcid);
      if (p.has_single_bonded(a, [&](int n) { return p.is(n, "N"); })) groups.insert(Group::Sulfonamide);
    }

    if (atom.element == "P") {
      // Phosphate: P bonded to four oxygens.
      const auto heavy = p.heavy_neighbors(a);
      const auto oxygens =
          std::count_if(heavy.begin(), heavy.end(), [&](const Neighbor& n) { return p.is(n.atom, "O"); });
      if (oxygens == 4) groups.insert(Group::Phosphate);
    }

    if (atom.element == "O" && !atom.aromatic) {
      const auto heavy = p.heavy_neighbors(a);
      const bool all_single_carbon = std::all_of(heavy.begin(), heavy.end(), [&](const Neighbor& n) {
        return n.order == BondOrder::Single && p.is(n.atom, "C") && !p.is_carbonyl_carbon(n.atom);
      });
      // Hydroxyl: H-O-C with a non-carbonyl carbon.
      if (heavy.size() == 1 && all_single_carbon && p.total_h(a) >= 1) groups.insert(Group::Hydroxyl);
      // Ether: C-O-C with neither carbon a carbonyl.
      if (heavy.size() == 2 && all_single_carbon) groups.insert(Group::Ether);
    }

    if (atom.element == "N" && !atom.aromatic) {
      // Amine: N with only single bonds to non-carbonyl carbons (and H).
      const auto heavy = p.heavy_neighbors(a);
      const bool ok = !heavy.empty() && std::all_of(heavy.begin(), heavy.end(), [&](const Neighbor& n) {
        return n.order == BondOrder::Single && p.is(n.atom, "C") && !p.is_carbonyl_carbon(n.atom);
      });
      if (ok) groups.insert(Group::Amine);
    }
  }
  return groups;
}

StructuralStats structural_stats(const MolGraph& mol) {
  StructuralStats stats = fluorocarbon_stats(mol);
  stats.functional_groups = detect_functional_groups(mol);
  return stats;
}

}  // namespace molaff::smiles
