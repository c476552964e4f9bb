#pragma once

#define MAMS_VERSION "0.1.0"
