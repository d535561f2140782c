#pragma once

#include <cstdio>
#include <string>

namespace quantamp {

inline constexpr const char* kCsvHeader = "# quantamp-csv v1";

inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

}  // namespace quantamp
