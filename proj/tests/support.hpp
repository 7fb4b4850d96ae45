#pragma once

#include <string>
#include <vector>

#include "quivernet/quiver.hpp"

namespace qn_test {

inline quivernet::Quiver make_quiver(std::vector<std::string> vertices,
                                     std::vector<quivernet::ArrowSpec> arrows) {
  return quivernet::Quiver::from_spec({std::move(vertices), std::move(arrows)});
}

inline quivernet::Quiver single_vertex() { return make_quiver({"1"}, {}); }
inline quivernet::Quiver a2() { return quivernet::Quiver::chain(2); }
inline quivernet::Quiver a3() { return quivernet::Quiver::chain(3); }
inline quivernet::Quiver loop() { return make_quiver({"1"}, {{"l", "1", "1"}}); }

}  // namespace qn_test
