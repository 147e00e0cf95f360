OCG-CHANGESET 1
author ms-rivera
rationale insert transfer and system boundaries as scaffolds while retaining the direct prerequisite link
severity minor
+node concept energy_transfer@Physics | Energy moves between parts of a system through work and heating | ms-rivera;dr-chen | pilot:unit3-worksheets | 2026-02-20T00:00:00Z
+node concept system_boundaries@Physics | Choosing the system decides which transfers cross the boundary | ms-rivera | pilot:unit3-worksheets | 2026-02-20T00:00:00Z
+edge prerequisite_of@Physics energy_as_property@Physics energy_transfer@Physics | ms-rivera | pilot:unit3-worksheets | 2026-02-20T00:00:00Z
+edge scaffolds@Physics energy_transfer@Physics system_boundaries@Physics | ms-rivera | pilot:unit3-worksheets | 2026-02-20T00:00:00Z
+edge scaffolds@Physics system_boundaries@Physics energy_conservation@Physics | ms-rivera | pilot:unit3-worksheets | 2026-02-20T00:00:00Z
