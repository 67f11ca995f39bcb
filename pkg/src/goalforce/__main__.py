from goalforce.cli import main

main()
