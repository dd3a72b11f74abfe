from .expcli import main

main()
