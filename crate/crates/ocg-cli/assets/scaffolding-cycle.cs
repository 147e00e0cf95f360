OCG-CHANGESET 1
author ms-rivera
rationale open the unit with conservation before defining energy as a property
severity minor
+edge prerequisite_of@Physics energy_conservation@Physics energy_as_property@Physics | ms-rivera | pilot:unit3-worksheets | 2026-02-20T00:00:00Z
