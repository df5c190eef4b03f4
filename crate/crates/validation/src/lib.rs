//! Holds the `acceptance` test target. Kept in its own package so a failing
//! check never stops the rest of the workspace suite from running.
