#ifndef AUCTIONMATCH_VERSION_HPP
#define AUCTIONMATCH_VERSION_HPP

namespace am {
inline constexpr const char* kVersion = "0.1.0";
}

#endif
