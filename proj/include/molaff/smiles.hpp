#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace molaff::smiles {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  std::string element;  // capitalised symbol, e.g. "C", "Cl"
  bool aromatic = false;
  int charge = 0;
  int hydrogens = 0;  // explicit (bracket) or implicit (organic subset) H count
  bool bracket = false;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

/// Simple undirected molecular graph.
struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<std::string> warnings;

  std::vector<std::vector<int>> neighbors() const;
  std::size_t bond_count() const { return bonds.size(); }
};

struct ParseOptions {
  // Valence violations are recorded in MolGraph::warnings unless strict.
  bool strict_valence = false;
};

MolGraph parse_smiles(std::string_view smiles, const ParseOptions& options = {});

enum class Group : std::uint8_t {
  CarboxylicAcid,
  SulfonicAcid,
  Sulfonamide,
  Hydroxyl,
  Ether,
  Amine,
  Ester,
  Ketone,
  Phosphate,
  HalideOther,
};

inline constexpr std::array<Group, 10> kAllGroups{
    Group::CarboxylicAcid, Group::SulfonicAcid, Group::Sulfonamide, Group::Hydroxyl, Group::Ether,
    Group::Amine,          Group::Ester,        Group::Ketone,      Group::Phosphate, Group::HalideOther};

std::string_view to_string(Group group);

/// Bit set over kAllGroups, indexed by the enum value.
class GroupSet {
 public:
  void insert(Group g) { bits_ |= static_cast<std::uint16_t>(1u << static_cast<unsigned>(g)); }
  bool contains(Group g) const { return (bits_ >> static_cast<unsigned>(g)) & 1u; }
  bool empty() const { return bits_ == 0; }
  std::size_t size() const;
  std::vector<Group> to_vector() const;
  bool operator==(const GroupSet&) const = default;

 private:
  std::uint16_t bits_ = 0;
};

struct StructuralStats {
  int longest_cf_chain = 0;
  int n_fluorinated_carbons = 0;
  GroupSet functional_groups;
};

/// Maximum vertex count of a fluorinated-carbon component searched exactly.
inline constexpr std::size_t kMaxChainSubgraph = 64;

/// Longest simple path (counted in vertices) in an undirected graph given as
/// adjacency lists. Throws SubgraphTooLarge above kMaxChainSubgraph vertices
/// in any connected component.
int longest_simple_path(const std::vector<std::vector<int>>& adjacency);

/// Chain statistics only; functional_groups is left empty.
StructuralStats fluorocarbon_stats(const MolGraph& mol);

GroupSet detect_functional_groups(const MolGraph& mol);

StructuralStats structural_stats(const MolGraph& mol);

}  // namespace molaff::smiles
