#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace scr {

class Error : public std::runtime_error {
public:
    explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

namespace detail {
inline void stream_parts(std::ostringstream&) {}

template <class T, class... Rest>
void stream_parts(std::ostringstream& os, T&& v, Rest&&... rest) {
    os << std::forward<T>(v);
    stream_parts(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <class... Parts>
std::string concat(Parts&&... parts) {
    std::ostringstream os;
    detail::stream_parts(os, std::forward<Parts>(parts)...);
    return os.str();
}

template <class... Parts>
[[noreturn]] void fail(Parts&&... parts) {
    throw Error(concat(std::forward<Parts>(parts)...));
}

}  // namespace scr
