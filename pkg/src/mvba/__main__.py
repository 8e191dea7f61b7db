from mvba.cli import entry

entry()
