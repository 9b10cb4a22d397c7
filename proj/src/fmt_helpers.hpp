// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <sstream>
#include <string>

namespace polyirt {

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace polyirt
