#pragma once

#include <cstdio>
#include <string>

namespace fmnet {

// %.12g keeps CSV floats byte-stable across runs without dumping all 17
// significant digits
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace fmnet
