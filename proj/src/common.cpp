#include "thinkrl/common.hpp"

#include <array>
#include <charconv>
#include <cstring>

namespace thinkrl {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

}  // namespace thinkrl
