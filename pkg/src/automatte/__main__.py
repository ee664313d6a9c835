from automatte.cli import main

main()
