#ifndef RRDPS_VERSION_HPP_
#define RRDPS_VERSION_HPP_

namespace rrdps {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rrdps

#endif  // RRDPS_VERSION_HPP_
