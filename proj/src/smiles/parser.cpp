//
// fedretro - Copyright 2026 The fedretro Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <cctype>
#include <map>
#include <optional>
#include <vector>

#include "fedretro/smiles.hpp"

namespace fedretro::smiles {
namespace {

struct BondSpec {
  std::optional<BondOrder> order;
  BondStereo stereo = BondStereo::kNone;
  std::size_t position = 0;

  bool present() const { return order.has_value(); }
};

struct RingOpening {
  int atom;
  BondSpec bond;
  std::size_t position;
};

struct BranchOpening {
  int atom;
  int atoms_before;
  std::size_t position;
};

bool is_digit(char c) {
  return c >= '0' && c <= '9';
}

class Parser {
public:
  explicit Parser(std::string_view text): text_(text) { }

  MolGraph parse() {
    if (text_.empty())
      throw SyntaxError("empty SMILES", 0);

    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (static_cast<unsigned char>(c) >= 0x80)
        throw SyntaxError("non-ASCII byte", pos_);

      if (c == '[' || std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos_;
        const Atom atom = c == '[' ? bracket_atom() : organic_atom();
        attach(mol_.add_atom(atom), start);
      } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/'
                 || c == '\\') {
        if (prev_ < 0 || pending_.present())
          throw SyntaxError("unexpected bond symbol", pos_);
        pending_ = bond_symbol(c, pos_);
        ++pos_;
      } else if (c == '(') {
        if (prev_ < 0 || pending_.present())
          throw SyntaxError("branch without a preceding atom", pos_);
        branches_.push_back({ prev_, mol_.num_atoms(), pos_ });
        ++pos_;
      } else if (c == ')') {
        if (branches_.empty())
          throw UnbalancedBranch("unmatched ')'", pos_);
        if (pending_.present())
          throw SyntaxError("bond symbol before ')'", pos_);
        if (branches_.back().atoms_before == mol_.num_atoms())
          throw SyntaxError("empty branch", pos_);
        prev_ = branches_.back().atom;
        branches_.pop_back();
        ++pos_;
      } else if (is_digit(c) || c == '%') {
        ring_bond();
      } else if (c == '.') {
        if (prev_ < 0 || pending_.present())
          throw SyntaxError("empty fragment", pos_);
        if (!branches_.empty())
          throw SyntaxError("fragment separator inside branch", pos_);
        prev_ = -1;
        ++pos_;
      } else {
        throw SyntaxError(std::string("unexpected character '") + c + "'",
                          pos_);
      }
    }

    if (pending_.present())
      throw SyntaxError("dangling bond symbol", pending_.position);
    if (!branches_.empty())
      throw UnbalancedBranch("unclosed '('", branches_.back().position);
    if (!rings_.empty())
      throw UnclosedRing("ring bond " + std::to_string(rings_.begin()->first)
                             + " never closed",
                         rings_.begin()->second.position);
    if (prev_ < 0)
      throw SyntaxError("empty fragment", text_.size());
    return std::move(mol_);
  }

private:
  static BondSpec bond_symbol(char c, std::size_t pos) {
    BondSpec spec;
    spec.position = pos;
    switch (c) {
    case '-':
      spec.order = BondOrder::kSingle;
      break;
    case '=':
      spec.order = BondOrder::kDouble;
      break;
    case '#':
      spec.order = BondOrder::kTriple;
      break;
    case ':':
      spec.order = BondOrder::kAromatic;
      break;
    case '/':
      spec.order = BondOrder::kSingle;
      spec.stereo = BondStereo::kUp;
      break;
    case '\\':
      spec.order = BondOrder::kSingle;
      spec.stereo = BondStereo::kDown;
      break;
    }
    return spec;
  }

  BondOrder default_order(int a, int b) const {
    return mol_.atom(a).aromatic && mol_.atom(b).aromatic ? BondOrder::kAromatic
                                                          : BondOrder::kSingle;
  }

  void attach(int atom, std::size_t start) {
    if (prev_ >= 0) {
      const BondOrder order = pending_.order.value_or(default_order(prev_, atom));
      mol_.add_bond(prev_, atom, order, pending_.stereo);
    } else if (pending_.present()) {
      throw SyntaxError("bond symbol without a preceding atom", start);
    }
    pending_ = {};
    prev_ = atom;
  }

  Atom organic_atom() {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    const char next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    Atom atom;
    switch (c) {
    case 'B':
      atom.element = next == 'r' ? Element::Br : Element::B;
      break;
    case 'C':
      atom.element = next == 'l' ? Element::Cl : Element::C;
      break;
    case 'N':
      atom.element = Element::N;
      break;
    case 'O':
      atom.element = Element::O;
      break;
    case 'P':
      atom.element = Element::P;
      break;
    case 'S':
      atom.element = Element::S;
      break;
    case 'F':
      atom.element = Element::F;
      break;
    case 'I':
      atom.element = Element::I;
      break;
    case 'b':
    case 'c':
    case 'n':
    case 'o':
    case 'p':
    case 's':
      atom.element = aromatic_element(c);
      atom.aromatic = true;
      break;
    default:
      throw UnsupportedElement(std::string("unsupported element '") + c + "'",
                               start);
    }
    pos_ += (atom.element == Element::Br || atom.element == Element::Cl) ? 2
                                                                         : 1;
    return atom;
  }

  static Element aromatic_element(char c) {
    switch (c) {
    case 'b':
      return Element::B;
    case 'c':
      return Element::C;
    case 'n':
      return Element::N;
    case 'o':
      return Element::O;
    case 'p':
      return Element::P;
    default:
      return Element::S;
    }
  }

  std::optional<int> read_number(int max_digits) {
    int value = 0, digits = 0;
    while (pos_ < text_.size() && is_digit(text_[pos_]) && digits < max_digits) {
      value = value * 10 + (text_[pos_] - '0');
      ++pos_;
      ++digits;
    }
    if (digits == 0)
      return std::nullopt;
    return value;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  Atom bracket_atom() {
    const std::size_t open = pos_;
    ++pos_;
    Atom atom;
    atom.explicit_h = 0;
    atom.isotope = read_number(3);

    const std::size_t sym_pos = pos_;
    const char c = peek();
    if (c == '\0')
      throw SyntaxError("unterminated bracket atom", open);
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (std::islower(static_cast<unsigned char>(peek_at(1))))
        sym += peek_at(1);
      static const std::map<std::string, Element, std::less<>> kElements = {
        { "B", Element::B },   { "C", Element::C },   { "N", Element::N },
        { "O", Element::O },   { "P", Element::P },   { "S", Element::S },
        { "F", Element::F },   { "Cl", Element::Cl }, { "Br", Element::Br },
        { "I", Element::I },   { "H", Element::H },
      };
      auto it = kElements.find(sym);
      if (it == kElements.end())
        throw UnsupportedElement("unsupported element '" + sym + "'", sym_pos);
      atom.element = it->second;
      pos_ += sym.size();
    } else if (std::islower(static_cast<unsigned char>(c))) {
      if (std::islower(static_cast<unsigned char>(peek_at(1))))
        throw UnsupportedElement(
            std::string("unsupported aromatic element '") + c + peek_at(1) + "'",
            sym_pos);
      if (c != 'b' && c != 'c' && c != 'n' && c != 'o' && c != 'p' && c != 's')
        throw UnsupportedElement(std::string("unsupported element '") + c + "'",
                                 sym_pos);
      atom.element = aromatic_element(c);
      atom.aromatic = true;
      ++pos_;
    } else {
      throw SyntaxError("expected element symbol", sym_pos);
    }

    if (peek() == '@') {
      ++pos_;
      atom.chirality = Chirality::kCounterClockwise;
      if (peek() == '@') {
        ++pos_;
        atom.chirality = Chirality::kClockwise;
      }
    }

    if (peek() == 'H') {
      ++pos_;
      atom.explicit_h = read_number(1).value_or(1);
    }

    if (peek() == '+' || peek() == '-') {
      const std::size_t charge_pos = pos_;
      const char sign = peek();
      ++pos_;
      int magnitude = 1;
      if (auto n = read_number(2)) {
        magnitude = *n;
      } else {
        while (peek() == sign) {
          ++magnitude;
          ++pos_;
        }
      }
      atom.formal_charge = sign == '+' ? magnitude : -magnitude;
      if (atom.formal_charge < -4 || atom.formal_charge > 4)
        throw SyntaxError("formal charge out of range", charge_pos);
    }

    // Atom-map classes are accepted and dropped.
    if (peek() == ':') {
      const std::size_t map_pos = pos_;
      ++pos_;
      if (!read_number(6))
        throw SyntaxError("expected atom-map number", map_pos);
    }

    if (peek() != ']')
      throw SyntaxError("expected ']'", pos_ < text_.size() ? pos_ : open);
    ++pos_;
    return atom;
  }

  char peek_at(std::size_t offset) const {
    return pos_ + offset < text_.size() ? text_[pos_ + offset] : '\0';
  }

  void ring_bond() {
    const std::size_t start = pos_;
    if (prev_ < 0)
      throw SyntaxError("ring bond without a preceding atom", start);

    int number;
    if (text_[pos_] == '%') {
      ++pos_;
      if (pos_ + 1 >= text_.size() || !is_digit(text_[pos_])
          || !is_digit(text_[pos_ + 1]))
        throw SyntaxError("'%' must be followed by two digits", start);
      number = (text_[pos_] - '0') * 10 + (text_[pos_ + 1] - '0');
      pos_ += 2;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
    }

    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_.emplace(number, RingOpening { prev_, pending_, start });
      pending_ = {};
      return;
    }

    const RingOpening opening = it->second;
    rings_.erase(it);
    const int closing = prev_;
    if (opening.atom == closing)
      throw SyntaxError("ring bond closes on its own atom", start);
    if (mol_.find_bond(opening.atom, closing) >= 0)
      throw SyntaxError("ring bond duplicates an existing bond", start);

    // Opening-side symbols read from the opening atom towards the closing
    // atom; closing-side symbols read the other way.
    BondSpec spec = opening.bond;
    if (pending_.present()) {
      BondSpec closing_spec = pending_;
      if (closing_spec.stereo == BondStereo::kUp)
        closing_spec.stereo = BondStereo::kDown;
      else if (closing_spec.stereo == BondStereo::kDown)
        closing_spec.stereo = BondStereo::kUp;
      if (spec.present()
          && (spec.order != closing_spec.order
              || spec.stereo != closing_spec.stereo))
        throw SyntaxError("conflicting ring bond symbols", start);
      spec = closing_spec;
    }
    const BondOrder order =
        spec.order.value_or(default_order(opening.atom, closing));
    mol_.add_bond(opening.atom, closing, order, spec.stereo);
    pending_ = {};
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  MolGraph mol_;
  int prev_ = -1;
  BondSpec pending_;
  std::vector<BranchOpening> branches_;
  std::map<int, RingOpening> rings_;
};

}  // namespace

MolGraph parse_smiles(std::string_view text) {
  return Parser(text).parse();
}

}  // namespace fedretro::smiles
