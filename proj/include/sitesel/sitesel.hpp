#pragma once

// Umbrella header for the engine (no HTTP or CLI dependencies).

#include "sitesel/domain.hpp"
#include "sitesel/error.hpp"
#include "sitesel/hierarchy.hpp"
#include "sitesel/ingestion.hpp"
#include "sitesel/presentation.hpp"
#include "sitesel/query.hpp"
#include "sitesel/snapshot.hpp"
#include "sitesel/synthetic.hpp"
#include "sitesel/time_point.hpp"
