namespace treelab {}
