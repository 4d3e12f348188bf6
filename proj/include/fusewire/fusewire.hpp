// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header. Pull in backends_http.hpp separately when the RemoteHttp
// transport is needed.

#include "fusewire/analytics.hpp"
#include "fusewire/argumentation.hpp"
#include "fusewire/backends.hpp"
#include "fusewire/contradiction.hpp"
#include "fusewire/errors.hpp"
#include "fusewire/evidence.hpp"
#include "fusewire/intake.hpp"
#include "fusewire/loop.hpp"
#include "fusewire/pipeline.hpp"
#include "fusewire/record.hpp"
#include "fusewire/textutil.hpp"
#include "fusewire/tools.hpp"
#include "fusewire/unified.hpp"
