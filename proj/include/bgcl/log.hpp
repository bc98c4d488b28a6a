#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

namespace bgcl::logging {

enum class Level { Error = 0, Info = 1, Debug = 2 };

inline Level threshold() {
  static const Level lvl = [] {
    const char* env = std::getenv("BGCL_LOG");
    if (!env) return Level::Info;
    const std::string s(env);
    if (s == "error") return Level::Error;
    if (s == "debug") return Level::Debug;
    return Level::Info;
  }();
  return lvl;
}

template <typename... Args>
inline void emit(Level lvl, const char* tag, Args&&... args) {
  if (lvl > threshold()) return;
  std::ostringstream os;
  os << "[bgcl:" << tag << "] ";
  (os << ... << args);
  std::cerr << os.str() << "\n";
}

template <typename... Args>
inline void error(Args&&... args) {
  emit(Level::Error, "error", std::forward<Args>(args)...);
}
template <typename... Args>
inline void info(Args&&... args) {
  emit(Level::Info, "info", std::forward<Args>(args)...);
}
template <typename... Args>
inline void debug(Args&&... args) {
  emit(Level::Debug, "debug", std::forward<Args>(args)...);
}

}  // namespace bgcl::logging
