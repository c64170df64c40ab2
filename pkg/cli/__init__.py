# Command-line front end: config files and subcommands
