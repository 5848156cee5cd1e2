#ifndef NLHG_VERSION_HPP
#define NLHG_VERSION_HPP

namespace nlhg {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nlhg

#endif  // NLHG_VERSION_HPP
