#pragma once

#include <json.hpp>

namespace nti {

const char* version();
// Versions of the third-party libraries compiled into the core library.
nlohmann::json library_versions();

}  // namespace nti
