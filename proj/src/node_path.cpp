#include "ksim/node_path.hpp"

#include <algorithm>
#include <stdexcept>

namespace ksim {

NodePath NodePath::parent() const {
  if (is_root()) throw std::logic_error("root has no parent");
  NodePath p = *this;
  p.indices.pop_back();
  return p;
}

bool NodePath::contains(NodePath const& other) const {
  if (indices.size() > other.indices.size()) return false;
  return std::equal(indices.begin(), indices.end(), other.indices.begin());
}

std::string NodePath::str() const {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += '/';
    out += std::to_string(indices[i]);
  }
  return out;
}

NodePath NodePath::parse(std::string const& text) {
  NodePath p;
  if (text.empty()) return p;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find('/', pos);
    std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (part.empty()) throw std::invalid_argument("bad node path: '" + text + "'");
    p.indices.push_back(static_cast<std::uint32_t>(std::stoul(part)));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return p;
}

}  // namespace ksim
