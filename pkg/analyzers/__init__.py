# This file makes Python treat the `analyzers` directory as a package.
